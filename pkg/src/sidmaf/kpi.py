"""KPI aggregation and policy comparison reports.

KPI1: mean over ride orders of the per-order mean accept probability of
the selected drivers (orders with an empty selection are excluded from
the mean but counted). KPI2: mean number of selected drivers per order,
empty selections included as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import SimulationTrace

KPI1_NOTE = ("KPI1 is the mean over orders of the per-order mean accept "
             "probability; orders with no selected drivers are excluded "
             "from KPI1 but reported separately and count as zero in KPI2.")


@dataclass
class KpiReport:
    policy_name: str
    kpi1: float
    kpi2: float
    n_orders: int
    orders_with_empty_selection: int


def kpi1(trace: SimulationTrace) -> float:
    if not trace.decisions:
        raise ValueError("empty trace")
    per_order = [float(np.mean(d.accept_probs))
                 for d in trace.decisions if d.accept_probs]
    if not per_order:
        raise ValueError("every order has an empty selection; KPI1 undefined")
    return float(np.mean(per_order))


def kpi2(trace: SimulationTrace) -> float:
    if not trace.decisions:
        raise ValueError("empty trace")
    return float(np.mean([len(d.selected_driver_ids) for d in trace.decisions]))


def report(trace: SimulationTrace) -> KpiReport:
    return KpiReport(
        policy_name=trace.policy_name,
        kpi1=kpi1(trace),
        kpi2=kpi2(trace),
        n_orders=len(trace.decisions),
        orders_with_empty_selection=sum(
            1 for d in trace.decisions if not d.selected_driver_ids),
    )


def compare(traces: list[SimulationTrace]) -> dict:
    """Machine-readable comparison with one row per policy."""
    if not traces:
        raise ValueError("need at least one trace")
    rows = [report(t) for t in traces]
    return {
        "rows": [
            {"policy": r.policy_name, "kpi1": r.kpi1, "kpi2": r.kpi2,
             "n_orders": r.n_orders,
             "orders_with_empty_selection": r.orders_with_empty_selection}
            for r in rows
        ],
        "note": KPI1_NOTE,
    }


def format_table(comparison: dict) -> str:
    rows = comparison["rows"]
    name_w = max(len("policy"), *(len(r["policy"]) for r in rows))
    lines = [f"{'policy':<{name_w}}  {'KPI1':>7}  {'KPI2':>7}  {'orders':>7}  {'empty':>6}"]
    for r in rows:
        lines.append(
            f"{r['policy']:<{name_w}}  {r['kpi1']:>7.3f}  {r['kpi2']:>7.2f}  "
            f"{r['n_orders']:>7d}  {r['orders_with_empty_selection']:>6d}")
    lines.append("")
    lines.append(comparison["note"])
    return "\n".join(lines)
