"""Minimal driver-subset selection with a probabilistic accept guarantee.

Candidates are ranked by modelled accept probability; the selection is
the shortest prefix whose probability of k or more accepts (a
Poisson-binomial tail) strictly exceeds the target threshold. If even
the full list misses the target, all candidates are selected and the
result is flagged unsatisfied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import GeoPoint, RideOrder
from .features import MISSING_DISTANCE, HistoryTable, local_hour_day, prague_center
from .geo import geo_distance_km, geo_distance_km_arrays


@dataclass(frozen=True)
class CandidateDriver:
    driver_id: str
    accept_prob: float
    position: Optional[GeoPoint] = None

    def __post_init__(self):
        if not 0.0 <= self.accept_prob <= 1.0:
            raise ValueError(f"accept_prob {self.accept_prob} outside [0, 1]")


@dataclass
class SelectionResult:
    selected: list[CandidateDriver]
    l: int
    k: int
    p_target: float
    achieved: float
    satisfied: bool


def _check_probs(probs):
    probs = [float(p) for p in probs]
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
    return probs


def prob_none_accept(probs: Sequence[float]) -> float:
    """Probability that no driver accepts: product of (1 - p_i)."""
    out = 1.0
    for p in _check_probs(probs):
        out *= 1.0 - p
    return out


def _fold(q: np.ndarray, p: float) -> None:
    """Fold one Bernoulli(p) into the truncated exact-count vector q,
    in place. q[j] = P(exactly j accepts), truncated at len(q)-1."""
    q[1:] = q[1:] * (1.0 - p) + q[:-1] * p
    q[0] *= 1.0 - p


def prob_at_least_k(probs: Sequence[float], k: int) -> float:
    """Poisson-binomial tail P(#accepts >= k) via the exact-count DP."""
    if k < 1:
        raise ValueError("k must be >= 1")
    probs = _check_probs(probs)
    if k > len(probs):
        return 0.0
    # only exact counts below k are needed for the tail
    q = np.zeros(k)
    q[0] = 1.0
    for p in probs:
        _fold(q, p)
    return float(min(1.0, max(0.0, 1.0 - q.sum())))


def exact_count_distribution(probs: Sequence[float]) -> np.ndarray:
    """Full vector q_0..q_n of P(exactly j accepts)."""
    probs = _check_probs(probs)
    q = np.zeros(len(probs) + 1)
    q[0] = 1.0
    for p in probs:
        _fold(q, p)
    return q


def select_drivers(candidates: Sequence[CandidateDriver], k: int,
                   p_target: float) -> SelectionResult:
    """Smallest probability-ranked prefix with P(>= k accepts) > p_target.

    Sort is by accept probability descending with driver_id as a
    deterministic tie-break. The prefix scan reuses one incremental DP,
    so the whole selection is O(n * k).
    """
    if not 0.0 < p_target < 1.0:
        raise ValueError(f"p_target {p_target} outside (0, 1)")
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(candidates, key=lambda c: (-c.accept_prob, c.driver_id))
    if not ranked:
        return SelectionResult([], l=0, k=k, p_target=p_target,
                               achieved=0.0, satisfied=False)

    q = np.zeros(k)
    q[0] = 1.0
    achieved = 0.0
    for l, cand in enumerate(ranked, start=1):
        _fold(q, cand.accept_prob)
        achieved = float(min(1.0, max(0.0, 1.0 - q.sum())))
        if achieved > p_target:
            return SelectionResult(ranked[:l], l=l, k=k, p_target=p_target,
                                   achieved=achieved, satisfied=True)
    return SelectionResult(ranked, l=len(ranked), k=k, p_target=p_target,
                           achieved=achieved, satisfied=False)


def score_candidates(model, order: RideOrder,
                     pool: Sequence[tuple[str, GeoPoint]],
                     histories: HistoryTable,
                     tz_name: str = "Europe/Prague") -> list[CandidateDriver]:
    """Model accept probability for every pool driver, in pool order.

    Feature rows are built with the vectorized distance helpers but are
    numerically identical to per-pair feature extraction.
    """
    if not pool:
        return []
    center = prague_center()
    hour, day = local_hour_day(order.timestamp, tz_name)
    lats = np.array([pos.lat for _, pos in pool])
    lons = np.array([pos.lon for _, pos in pool])
    pickup_distance = geo_distance_km_arrays(
        lats, lons, order.pickup.lat, order.pickup.lon)
    pickup_center = geo_distance_km(order.pickup, center)
    if order.dropoff is not None:
        ride_distance = geo_distance_km(order.pickup, order.dropoff)
        ride_center = geo_distance_km(order.dropoff, center)
    else:
        ride_distance = MISSING_DISTANCE
        ride_center = MISSING_DISTANCE
    rates = np.array([histories.rate_for(driver_id) for driver_id, _ in pool])
    n = len(pool)
    X = np.column_stack([
        pickup_distance,
        np.full(n, ride_distance),
        np.full(n, pickup_center),
        np.full(n, ride_center),
        np.full(n, float(hour)),
        np.full(n, float(day)),
        rates,
    ])
    probs = model.accept_proba(X)
    return [CandidateDriver(driver_id, float(p), pos)
            for (driver_id, pos), p in zip(pool, probs)]
