"""Deterministic trace-replay simulation of market-formation policies.

Only orders that actually concluded in a ride are replayed. For each one
the engine builds the pool of currently available drivers (fresh trail
position, not busy), asks the policy for a driver selection with accept
probabilities, draws the winning offer uniformly at random with the run
seed, and removes that driver for the estimated ride duration. Driver
positions always come from the recorded trails, including after a
simulated ride ends.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .dataset import Dataset, DataError, DriverResponse, DriverTrail, GeoPoint, RideOrder
from .features import HistoryTable
from .geo import geo_distance_km, geo_distance_km_arrays
from .selection import score_candidates, select_drivers

log = logging.getLogger(__name__)


@dataclass
class SimulationConfig:
    staleness_s: int = 60            # max age of a trail sample to count as available
    avg_speed_fallback_kmh: float = 24.0
    fallback_ride_km: float = 5.0    # ride length when the dropoff is unknown
    min_ride_gap_s: int = 120        # trail gap treated as a ride when estimating speed
    tz_name: str = "Europe/Prague"


@dataclass
class PolicyDecision:
    order_id: str
    selected_driver_ids: list[str]
    accept_probs: list[float]
    chosen_offer: Optional[str]
    busy_from: Optional[int] = None
    busy_until: Optional[int] = None


@dataclass
class SimulationTrace:
    policy_name: str
    seed: int
    config: dict
    avg_speed_kmh: float
    decisions: list[PolicyDecision] = field(default_factory=list)


def driver_position_at(trail: DriverTrail, t: int,
                       staleness_s: int = 60) -> Optional[GeoPoint]:
    """Last-observation-carried-forward position, or None when the most
    recent sample is older than the staleness window."""
    i = int(np.searchsorted(trail.ts, t, side="right")) - 1
    if i < 0 or t - trail.ts[i] > staleness_s:
        return None
    return GeoPoint(float(trail.lat[i]), float(trail.lon[i]))


def estimate_avg_speed(d: Dataset, config: SimulationConfig | None = None) -> float:
    """Mean speed over completed rides whose duration is measurable from
    the selected driver's trail gap; configured fallback otherwise."""
    config = config or SimulationConfig()
    speeds = []
    for o in d.completed_orders():
        if o.dropoff is None or o.selected_driver not in d.trails:
            continue
        trail = d.trails[o.selected_driver]
        i = int(np.searchsorted(trail.ts, o.timestamp, side="right")) - 1
        if i < 0 or i + 1 >= len(trail):
            continue
        gap = int(trail.ts[i + 1] - trail.ts[i])
        if gap < config.min_ride_gap_s:
            continue
        duration_h = (int(trail.ts[i + 1]) - o.timestamp) / 3600.0
        if duration_h <= 0:
            continue
        speeds.append(geo_distance_km(o.pickup, o.dropoff) / duration_h)
    if not speeds:
        log.warning("no measurable ride durations; falling back to %.1f km/h",
                    config.avg_speed_fallback_kmh)
        return config.avg_speed_fallback_kmh
    return float(np.mean(speeds))


class SidmafPolicy:
    """Score the pool with the acceptance model, select the smallest
    prefix meeting the k-accept probability target."""

    uses_pool = True

    def __init__(self, model, histories: HistoryTable, k: int = 1,
                 p_target: float = 0.999, tz_name: str = "Europe/Prague"):
        self.model = model
        self.histories = histories
        self.k = k
        self.p_target = p_target
        self.tz_name = tz_name

    @property
    def name(self) -> str:
        return f"sidmaf(k={self.k},p_target={self.p_target})"

    def decide(self, order: RideOrder, pool) -> PolicyDecision:
        candidates = score_candidates(self.model, order, pool, self.histories,
                                      self.tz_name)
        result = select_drivers(candidates, self.k, self.p_target) if candidates \
            else None
        if result is None:
            return PolicyDecision(order.order_id, [], [], None)
        return PolicyDecision(
            order.order_id,
            [c.driver_id for c in result.selected],
            [c.accept_prob for c in result.selected],
            None,
        )


class ReplayBaselinePolicy:
    """Reproduce exactly the drivers addressed in the recorded data,
    with probability 1 for accepting drivers and 0 otherwise."""

    uses_pool = False
    name = "replay"

    def decide(self, order: RideOrder, pool) -> PolicyDecision:
        return PolicyDecision(
            order.order_id,
            [r.driver_id for r in order.requests],
            [1.0 if r.response is DriverResponse.ACCEPTED else 0.0
             for r in order.requests],
            order.selected_driver,
        )


class DistanceBaselinePolicy:
    """Address the m nearest available drivers; probabilities come from
    the acceptance model so KPI1 is comparable across policies."""

    uses_pool = True

    def __init__(self, m: int, model, histories: HistoryTable,
                 tz_name: str = "Europe/Prague"):
        self.m = m
        self.model = model
        self.histories = histories
        self.tz_name = tz_name

    @property
    def name(self) -> str:
        return f"distance(m={self.m})"

    def decide(self, order: RideOrder, pool) -> PolicyDecision:
        if not pool:
            return PolicyDecision(order.order_id, [], [], None)
        dist = geo_distance_km_arrays(
            np.array([p.lat for _, p in pool]),
            np.array([p.lon for _, p in pool]),
            order.pickup.lat, order.pickup.lon)
        nearest = np.argsort(dist, kind="stable")[:self.m]
        chosen_pool = [pool[i] for i in nearest]
        candidates = score_candidates(self.model, order, chosen_pool,
                                      self.histories, self.tz_name)
        return PolicyDecision(
            order.order_id,
            [c.driver_id for c in candidates],
            [c.accept_prob for c in candidates],
            None,
        )


class _PoolIndex:
    """Per-driver trail cursors; orders arrive in time order so cursor
    advancement is amortized O(total samples)."""

    def __init__(self, trails: dict[str, DriverTrail]):
        self.driver_ids = sorted(trails)
        self.trails = [trails[d] for d in self.driver_ids]
        self.cursor = [0] * len(self.driver_ids)

    def available(self, t: int, staleness_s: int, busy_until: dict):
        pool = []
        for j, driver_id in enumerate(self.driver_ids):
            trail = self.trails[j]
            ts = trail.ts
            i = self.cursor[j]
            n = len(ts)
            while i + 1 < n and ts[i + 1] <= t:
                i += 1
            self.cursor[j] = i
            if ts[i] > t or t - ts[i] > staleness_s:
                continue
            if busy_until.get(driver_id, 0) > t:
                continue
            pool.append((driver_id, GeoPoint(float(trail.lat[i]), float(trail.lon[i]))))
        return pool


def run_simulation(d: Dataset, policy, seed: int,
                   config: SimulationConfig | None = None) -> SimulationTrace:
    config = config or SimulationConfig()
    rng = np.random.default_rng(seed)
    avg_speed = estimate_avg_speed(d, config)
    pool_index = _PoolIndex(d.trails)
    busy_until: dict[str, int] = {}

    trace = SimulationTrace(
        policy_name=policy.name, seed=seed, config=asdict(config),
        avg_speed_kmh=avg_speed)

    for order in d.completed_orders():
        t = order.timestamp
        pool = pool_index.available(t, config.staleness_s, busy_until) \
            if policy.uses_pool else []
        decision = policy.decide(order, pool)
        if decision.chosen_offer is None and decision.selected_driver_ids:
            decision.chosen_offer = decision.selected_driver_ids[
                int(rng.integers(len(decision.selected_driver_ids)))]
        if decision.chosen_offer is not None:
            if order.dropoff is not None:
                ride_km = geo_distance_km(order.pickup, order.dropoff)
            else:
                ride_km = config.fallback_ride_km
            duration_s = max(1, int(ride_km / avg_speed * 3600.0))
            # if the driver is somehow still busy (replay of recorded
            # choices), serialize the rides so busy intervals stay disjoint
            start = max(t, busy_until.get(decision.chosen_offer, t))
            decision.busy_from = start
            decision.busy_until = start + duration_s
            busy_until[decision.chosen_offer] = start + duration_s
        trace.decisions.append(decision)

    n_completed = len(d.completed_orders())
    assert len(trace.decisions) == n_completed, \
        f"decision count {len(trace.decisions)} != completed orders {n_completed}"
    return trace


def write_trace(trace: SimulationTrace, path):
    with open(path, "w") as f:
        header = {"type": "header", "policy": trace.policy_name,
                  "seed": trace.seed, "config": trace.config,
                  "avg_speed_kmh": trace.avg_speed_kmh}
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for dec in trace.decisions:
            f.write(json.dumps({"type": "decision", **asdict(dec)},
                               sort_keys=True) + "\n")


def read_trace(path) -> SimulationTrace:
    with open(path) as f:
        lines = [json.loads(line) for line in f if line.strip()]
    if not lines or lines[0].get("type") != "header":
        raise DataError(f"{path}: missing trace header record")
    head = lines[0]
    trace = SimulationTrace(
        policy_name=head["policy"], seed=head["seed"], config=head["config"],
        avg_speed_kmh=head["avg_speed_kmh"])
    for obj in lines[1:]:
        if obj.get("type") != "decision":
            raise DataError(f"{path}: unexpected record type {obj.get('type')}")
        trace.decisions.append(PolicyDecision(
            order_id=obj["order_id"],
            selected_driver_ids=obj["selected_driver_ids"],
            accept_probs=obj["accept_probs"],
            chosen_offer=obj["chosen_offer"],
            busy_from=obj.get("busy_from"),
            busy_until=obj.get("busy_until"),
        ))
    return trace
