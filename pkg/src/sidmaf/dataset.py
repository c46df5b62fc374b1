"""Canonical data model and file formats for ride-order transaction data.

Orders live in a JSONL file (one ride order per line, nested driver
requests) and driver GPS trails in a flat CSV (driver_id,ts,lat,lon).
A seeded synthetic generator produces datasets with a known ground-truth
acceptance law so the downstream classifier has a learnable signal.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .geo import (
    CITY_CENTER_LAT,
    CITY_CENTER_LON,
    geo_distance_km_arrays,
    km_to_deg_lat,
    km_to_deg_lon,
)


class DataError(Exception):
    """Raised for schema violations and inconsistent input files."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise DataError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise DataError(f"longitude {self.lon} outside [-180, 180]")


class DriverResponse(str, Enum):
    ACCEPTED = "accept"
    DECLINED = "decline"
    TIMED_OUT = "timeout"


@dataclass(frozen=True)
class DriverRequest:
    driver_id: str
    driver_position: GeoPoint
    response: DriverResponse

    def __post_init__(self):
        if not self.driver_id:
            raise DataError("empty driver_id in request")


@dataclass(frozen=True)
class RideOrder:
    order_id: str
    timestamp: int
    pickup: GeoPoint
    dropoff: Optional[GeoPoint]
    requests: tuple[DriverRequest, ...]
    completed: bool
    selected_driver: Optional[str]

    def __post_init__(self):
        if not self.requests:
            raise DataError(f"order {self.order_id}: empty requests list")
        if self.completed:
            if self.selected_driver is None:
                raise DataError(
                    f"order {self.order_id}: completed but no selected_driver")
            sel = [r for r in self.requests if r.driver_id == self.selected_driver]
            if not sel:
                raise DataError(
                    f"order {self.order_id}: selected_driver "
                    f"{self.selected_driver} not among requests")
            if sel[0].response is not DriverResponse.ACCEPTED:
                raise DataError(
                    f"order {self.order_id}: selected_driver "
                    f"{self.selected_driver} did not accept")


@dataclass
class DriverTrail:
    """Time-ordered GPS availability samples for one driver.

    Stored as parallel numpy arrays; nominal cadence is ~20 s but gaps
    are expected (drivers go offline while on a ride or off shift).
    """

    driver_id: str
    ts: np.ndarray
    lat: np.ndarray
    lon: np.ndarray

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=np.int64)
        self.lat = np.asarray(self.lat, dtype=np.float64)
        self.lon = np.asarray(self.lon, dtype=np.float64)
        if np.any(np.diff(self.ts) <= 0):
            raise DataError(
                f"trail for {self.driver_id}: timestamps not strictly increasing")

    def __len__(self):
        return len(self.ts)


@dataclass
class Dataset:
    orders: list[RideOrder]
    trails: dict[str, DriverTrail] = field(default_factory=dict)

    def __post_init__(self):
        self.orders = sorted(self.orders, key=lambda o: (o.timestamp, o.order_id))
        if self.trails:
            for o in self.orders:
                if o.selected_driver is not None and o.selected_driver not in self.trails:
                    raise DataError(
                        f"order {o.order_id}: selected driver "
                        f"{o.selected_driver} has no trail")

    def completed_orders(self) -> list[RideOrder]:
        return [o for o in self.orders if o.completed]


@dataclass
class SummaryStats:
    n_orders: int
    n_instances: int
    n_accepts: int
    n_reject_or_timeout: int
    n_drivers: int
    n_completed: int
    completed_fraction: float
    accept_fraction: float


def _parse_point(obj, where: str) -> GeoPoint:
    try:
        return GeoPoint(float(obj["lat"]), float(obj["lon"]))
    except (DataError, KeyError, TypeError, ValueError) as e:
        raise DataError(f"{where}: bad point {obj!r}: {e}") from e


_RESPONSES = {r.value: r for r in DriverResponse}


def _parse_order(obj: dict, where: str) -> RideOrder:
    try:
        requests = []
        for i, req in enumerate(obj["requests"]):
            resp = req["response"]
            if resp not in _RESPONSES:
                raise DataError(f"{where} request {i}: unknown response {resp!r}")
            requests.append(DriverRequest(
                driver_id=str(req["driver_id"]),
                driver_position=_parse_point(req["pos"], f"{where} request {i}"),
                response=_RESPONSES[resp],
            ))
        dropoff = obj.get("dropoff")
        return RideOrder(
            order_id=str(obj["order_id"]),
            timestamp=int(obj["ts"]),
            pickup=_parse_point(obj["pickup"], where),
            dropoff=None if dropoff is None else _parse_point(dropoff, where),
            requests=tuple(requests),
            completed=bool(obj["completed"]),
            selected_driver=obj.get("selected_driver"),
        )
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{where}: {e}") from e


def load_orders(path) -> list[RideOrder]:
    orders = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path} line {lineno}: invalid JSON: {e}") from e
            orders.append(_parse_order(obj, f"{path} line {lineno}"))
    return orders


def load_trails(path) -> dict[str, DriverTrail]:
    by_driver: dict[str, list[tuple[int, float, float]]] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["driver_id", "ts", "lat", "lon"]:
            raise DataError(f"{path}: expected header driver_id,ts,lat,lon, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path} line {lineno}: expected 4 columns")
            try:
                by_driver.setdefault(row[0], []).append(
                    (int(row[1]), float(row[2]), float(row[3])))
            except ValueError as e:
                raise DataError(f"{path} line {lineno}: {e}") from e
    trails = {}
    for driver_id, samples in by_driver.items():
        samples.sort(key=lambda s: s[0])
        ts, lat, lon = zip(*samples)
        for v in lat:
            if not -90.0 <= v <= 90.0:
                raise DataError(f"{path}: trail {driver_id}: latitude {v} out of range")
        for v in lon:
            if not -180.0 <= v <= 180.0:
                raise DataError(f"{path}: trail {driver_id}: longitude {v} out of range")
        trails[driver_id] = DriverTrail(driver_id, np.array(ts), np.array(lat), np.array(lon))
    return trails


def load_dataset(orders_path, trails_path=None) -> Dataset:
    orders = load_orders(orders_path)
    trails = load_trails(trails_path) if trails_path else {}
    return Dataset(orders=orders, trails=trails)


def _order_to_obj(o: RideOrder) -> dict:
    return {
        "order_id": o.order_id,
        "ts": o.timestamp,
        "pickup": {"lat": round(o.pickup.lat, 7), "lon": round(o.pickup.lon, 7)},
        "dropoff": None if o.dropoff is None else
            {"lat": round(o.dropoff.lat, 7), "lon": round(o.dropoff.lon, 7)},
        "completed": o.completed,
        "selected_driver": o.selected_driver,
        "requests": [
            {"driver_id": r.driver_id,
             "pos": {"lat": round(r.driver_position.lat, 7),
                     "lon": round(r.driver_position.lon, 7)},
             "response": r.response.value}
            for r in o.requests
        ],
    }


def write_orders(orders: Iterable[RideOrder], path):
    with open(path, "w") as f:
        for o in orders:
            f.write(json.dumps(_order_to_obj(o), sort_keys=True) + "\n")


def write_trails(trails: dict[str, DriverTrail], path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["driver_id", "ts", "lat", "lon"])
        for driver_id in sorted(trails):
            t = trails[driver_id]
            for i in range(len(t)):
                w.writerow([driver_id, int(t.ts[i]), f"{t.lat[i]:.7f}", f"{t.lon[i]:.7f}"])


def write_dataset(d: Dataset, orders_path, trails_path=None):
    write_orders(d.orders, orders_path)
    if trails_path is not None:
        write_trails(d.trails, trails_path)


def dataset_summary(d: Dataset) -> SummaryStats:
    n_orders = len(d.orders)
    n_instances = sum(len(o.requests) for o in d.orders)
    n_accepts = sum(
        1 for o in d.orders for r in o.requests
        if r.response is DriverResponse.ACCEPTED)
    n_completed = sum(1 for o in d.orders if o.completed)
    drivers = {r.driver_id for o in d.orders for r in o.requests} | set(d.trails)
    return SummaryStats(
        n_orders=n_orders,
        n_instances=n_instances,
        n_accepts=n_accepts,
        n_reject_or_timeout=n_instances - n_accepts,
        n_drivers=len(drivers),
        n_completed=n_completed,
        completed_fraction=n_completed / n_orders if n_orders else 0.0,
        accept_fraction=n_accepts / n_instances if n_instances else 0.0,
    )


@dataclass
class SyntheticConfig:
    """Knobs for the synthetic generator.

    Acceptance ground truth is logistic in pickup distance:
    P(accept) = sigmoid(base_logit + driver_offset - distance_decay * km).
    """

    n_drivers: int = 20
    n_orders: int = 200
    center_lat: float = CITY_CENTER_LAT
    center_lon: float = CITY_CENTER_LON
    spread_km: float = 5.0
    pickup_spread_km: float | None = None  # defaults to spread_km
    base_logit: float = 4.0
    driver_offset_sd: float = 0.5
    distance_decay: float = 1.5          # logit units per km
    dropoff_prob: float = 0.9
    start_ts: int = 1433116800           # 2015-06-01 00:00:00 UTC
    duration_s: int = 6 * 3600
    min_offers: int = 4
    max_offers: int = 8
    trail_cadence_s: int = 20
    driver_step_km: float = 0.05         # random-walk step per trail sample
    ride_speed_kmh: float = 25.0
    fallback_ride_km: float = 3.0        # ride length when dropoff is missing


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def generate_synthetic(config: SyntheticConfig, seed: int) -> Dataset:
    """Generate a seeded dataset with trails consistent with the orders.

    The selected driver's trail gets a gap for the ride duration, so
    availability and average-speed estimation behave like real data.
    Deterministic: same (config, seed) gives an identical dataset.
    """
    if config.n_drivers < 1 or config.n_orders < 1:
        raise ValueError("need at least one driver and one order")
    rng = np.random.default_rng(seed)
    nd = config.n_drivers

    lat_sd = km_to_deg_lat(config.spread_km)
    lon_sd = km_to_deg_lon(config.spread_km, config.center_lat)
    pickup_spread = config.spread_km if config.pickup_spread_km is None \
        else config.pickup_spread_km
    plat_sd = km_to_deg_lat(pickup_spread)
    plon_sd = km_to_deg_lon(pickup_spread, config.center_lat)

    offsets = rng.normal(0.0, config.driver_offset_sd, size=nd)
    driver_ids = [f"d{i:03d}" for i in range(nd)]

    # random-walk trails on a fixed cadence grid
    n_steps = config.duration_s // config.trail_cadence_s + 1
    step_lat = km_to_deg_lat(config.driver_step_km)
    step_lon = km_to_deg_lon(config.driver_step_km, config.center_lat)
    lat0 = rng.normal(config.center_lat, lat_sd, size=nd)
    lon0 = rng.normal(config.center_lon, lon_sd, size=nd)
    walk_lat = np.cumsum(rng.normal(0, step_lat, size=(nd, n_steps)), axis=1) + lat0[:, None]
    walk_lon = np.cumsum(rng.normal(0, step_lon, size=(nd, n_steps)), axis=1) + lon0[:, None]
    walk_lat = np.clip(walk_lat, -90.0, 90.0)
    walk_lon = np.clip(walk_lon, -180.0, 180.0)
    grid_ts = config.start_ts + np.arange(n_steps, dtype=np.int64) * config.trail_cadence_s

    order_ts = np.sort(rng.integers(
        config.start_ts, config.start_ts + config.duration_s, size=config.n_orders))

    gaps: dict[int, list[tuple[int, int]]] = {i: [] for i in range(nd)}
    orders = []
    for j in range(config.n_orders):
        ts = int(order_ts[j])
        step = min((ts - config.start_ts) // config.trail_cadence_s, n_steps - 1)
        pickup = GeoPoint(
            float(np.clip(rng.normal(config.center_lat, plat_sd), -90, 90)),
            float(rng.normal(config.center_lon, plon_sd)))
        if rng.random() < config.dropoff_prob:
            dropoff = GeoPoint(
                float(np.clip(rng.normal(config.center_lat, plat_sd), -90, 90)),
                float(rng.normal(config.center_lon, plon_sd)))
        else:
            dropoff = None

        cur_lat = walk_lat[:, step]
        cur_lon = walk_lon[:, step]
        dist = geo_distance_km_arrays(cur_lat, cur_lon, pickup.lat, pickup.lon)
        m = int(rng.integers(config.min_offers, config.max_offers + 1))
        m = min(m, nd)
        offered = np.argsort(dist, kind="stable")[:m]

        p_accept = _sigmoid(config.base_logit + offsets[offered]
                            - config.distance_decay * dist[offered])
        accepted = rng.random(m) < p_accept

        requests = tuple(
            DriverRequest(
                driver_ids[i],
                GeoPoint(float(cur_lat[i]), float(cur_lon[i])),
                DriverResponse.ACCEPTED if acc else
                (DriverResponse.DECLINED if rng.random() < 0.5 else DriverResponse.TIMED_OUT),
            )
            for i, acc in zip(offered, accepted)
        )
        completed = bool(accepted.any())
        selected = None
        if completed:
            winners = offered[accepted]
            sel_idx = int(winners[rng.integers(len(winners))])
            selected = driver_ids[sel_idx]
            if dropoff is not None:
                ride_km = float(geo_distance_km_arrays(
                    pickup.lat, pickup.lon, dropoff.lat, dropoff.lon))
            else:
                ride_km = config.fallback_ride_km
            ride_s = int(ride_km / config.ride_speed_kmh * 3600.0)
            gaps[sel_idx].append((ts, ts + max(ride_s, config.trail_cadence_s)))

        orders.append(RideOrder(
            order_id=f"o{j:05d}", timestamp=ts, pickup=pickup, dropoff=dropoff,
            requests=requests, completed=completed, selected_driver=selected))

    trails = {}
    for i in range(nd):
        keep = np.ones(n_steps, dtype=bool)
        for t0, t1 in gaps[i]:
            keep &= ~((grid_ts > t0) & (grid_ts < t1))
        trails[driver_ids[i]] = DriverTrail(
            driver_ids[i], grid_ts[keep], walk_lat[i, keep], walk_lon[i, keep])

    return Dataset(orders=orders, trails=trails)


def import_external(src_path, orders_out, trails_out=None):
    """One-shot converter from the nested JSON export format to the
    canonical JSONL + CSV files.

    Expected input: a single JSON document {"rides": [...], "trails": [...]}
    where each ride has orderId, created (epoch s), from/to points with
    lat/lon, offers with driverId/position/status (ACCEPTED, DECLINED,
    TIMEOUT) and optional finished/driverId; each trail entry has driverId
    and points as [ts, lat, lon] triples.
    """
    with open(src_path) as f:
        doc = json.load(f)
    status_map = {"ACCEPTED": "accept", "DECLINED": "decline", "TIMEOUT": "timeout"}
    orders = []
    for i, ride in enumerate(doc.get("rides", [])):
        where = f"{src_path} ride {i}"
        try:
            obj = {
                "order_id": str(ride["orderId"]),
                "ts": int(ride["created"]),
                "pickup": {"lat": ride["from"]["lat"], "lon": ride["from"]["lon"]},
                "dropoff": None if ride.get("to") is None else
                    {"lat": ride["to"]["lat"], "lon": ride["to"]["lon"]},
                "completed": bool(ride.get("finished", False)),
                "selected_driver": ride.get("driverId"),
                "requests": [
                    {"driver_id": str(of["driverId"]),
                     "pos": {"lat": of["position"]["lat"], "lon": of["position"]["lon"]},
                     "response": status_map[of["status"]]}
                    for of in ride["offers"]
                ],
            }
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{where}: {e}") from e
        orders.append(_parse_order(obj, where))
    write_orders(sorted(orders, key=lambda o: (o.timestamp, o.order_id)), orders_out)

    if trails_out is not None:
        trails = {}
        for i, tr in enumerate(doc.get("trails", [])):
            try:
                pts = sorted(tr["points"], key=lambda p: p[0])
                ts = np.array([p[0] for p in pts], dtype=np.int64)
                trails[str(tr["driverId"])] = DriverTrail(
                    str(tr["driverId"]), ts,
                    np.array([p[1] for p in pts]), np.array([p[2] for p in pts]))
            except (KeyError, TypeError, ValueError, IndexError) as e:
                raise DataError(f"{src_path} trail {i}: {e}") from e
        write_trails(trails, trails_out)
    return len(orders)
