"""Feature extraction for (ride order, driver) pairs.

Seven features per instance: pickup_distance, ride_distance,
pickup_center, ride_center, hour, day and the driver's historical
mean_accept_rate. Missing drop-off yields a -1 sentinel for the two
ride-based distances instead of imputation, so tree splits can isolate
destination-less orders.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from zoneinfo import ZoneInfo

import numpy as np

from .dataset import Dataset, DriverRequest, DriverResponse, GeoPoint, RideOrder
from .geo import CITY_CENTER_LAT, CITY_CENTER_LON, geo_distance_km

FEATURE_NAMES = (
    "pickup_distance",
    "ride_distance",
    "pickup_center",
    "ride_center",
    "hour",
    "day",
    "mean_accept_rate",
)

MISSING_DISTANCE = -1.0

DEFAULT_TIMEZONE = "Europe/Prague"


def prague_center() -> GeoPoint:
    """City-center reference point used by the *_center features."""
    return GeoPoint(CITY_CENTER_LAT, CITY_CENTER_LON)


@dataclass(frozen=True)
class FeatureVector:
    pickup_distance: float
    ride_distance: float
    pickup_center: float
    ride_center: float
    hour: int
    day: int
    mean_accept_rate: float

    def as_array(self) -> np.ndarray:
        return np.array([
            self.pickup_distance, self.ride_distance, self.pickup_center,
            self.ride_center, float(self.hour), float(self.day),
            self.mean_accept_rate,
        ])


@dataclass
class DriverHistory:
    driver_id: str
    accepts: int = 0
    total: int = 0

    @property
    def rate(self) -> float:
        return self.accepts / self.total if self.total else 0.0


class HistoryTable:
    """Per-driver accept counts plus a global-mean fallback for drivers
    that never appear in the aggregation scope."""

    def __init__(self, histories: dict[str, DriverHistory]):
        self.histories = histories
        accepts = sum(h.accepts for h in histories.values())
        total = sum(h.total for h in histories.values())
        self.global_rate = accepts / total if total else 0.5

    def rate_for(self, driver_id: str) -> float:
        h = self.histories.get(driver_id)
        if h is None or h.total == 0:
            return self.global_rate
        return h.rate


def build_histories(d: Dataset, orders=None) -> HistoryTable:
    """Aggregate accept counts per driver.

    `orders` restricts the aggregation scope (e.g. to a training fold);
    default is every order in the dataset.
    """
    histories: dict[str, DriverHistory] = {}
    for o in (d.orders if orders is None else orders):
        for r in o.requests:
            h = histories.setdefault(r.driver_id, DriverHistory(r.driver_id))
            h.total += 1
            if r.response is DriverResponse.ACCEPTED:
                h.accepts += 1
    return HistoryTable(histories)


def local_hour_day(ts: int, tz_name: str = DEFAULT_TIMEZONE) -> tuple[int, int]:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc).astimezone(ZoneInfo(tz_name))
    return dt.hour, dt.weekday()


def extract(order: RideOrder, req: DriverRequest, histories: HistoryTable,
            tz_name: str = DEFAULT_TIMEZONE) -> FeatureVector:
    center = prague_center()
    hour, day = local_hour_day(order.timestamp, tz_name)
    if order.dropoff is not None:
        ride_distance = geo_distance_km(order.pickup, order.dropoff)
        ride_center = geo_distance_km(order.dropoff, center)
    else:
        ride_distance = MISSING_DISTANCE
        ride_center = MISSING_DISTANCE
    return FeatureVector(
        pickup_distance=geo_distance_km(req.driver_position, order.pickup),
        ride_distance=ride_distance,
        pickup_center=geo_distance_km(order.pickup, center),
        ride_center=ride_center,
        hour=hour,
        day=day,
        mean_accept_rate=histories.rate_for(req.driver_id),
    )


def build_matrix(d: Dataset, histories: HistoryTable | None = None,
                 orders=None, tz_name: str = DEFAULT_TIMEZONE):
    """Feature matrix and accept labels over all (order, request) pairs.

    Returns (X, y) with X of shape (n_instances, 7) and y in {0, 1}.
    """
    if histories is None:
        histories = build_histories(d, orders=orders)
    rows, labels = [], []
    for o in (d.orders if orders is None else orders):
        for r in o.requests:
            rows.append(extract(o, r, histories, tz_name).as_array())
            labels.append(1 if r.response is DriverResponse.ACCEPTED else 0)
    X = np.array(rows) if rows else np.empty((0, len(FEATURE_NAMES)))
    return X, np.array(labels, dtype=np.int64)


def write_matrix_csv(X: np.ndarray, y: np.ndarray, path):
    header = ",".join(FEATURE_NAMES) + ",label"
    with open(path, "w") as f:
        f.write(header + "\n")
        for row, label in zip(X, y):
            f.write(",".join(f"{v:.10g}" for v in row) + f",{int(label)}\n")


def read_matrix_csv(path):
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim == 1:
        data = data.reshape(1, -1)
    if data.shape[1] != len(FEATURE_NAMES) + 1:
        raise ValueError(
            f"{path}: expected {len(FEATURE_NAMES) + 1} columns, got {data.shape[1]}")
    return data[:, :-1], data[:, -1].astype(np.int64)
