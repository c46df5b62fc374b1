import pathlib

import pytest

from sidmaf import (
    Dataset,
    DriverRequest,
    DriverResponse,
    DriverTrail,
    GeoPoint,
    RideOrder,
)

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# one line per acceptance criterion, printed after the run (see test_acceptance)
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def make_order(order_id="o1", ts=1433116800, pickup=(50.08, 14.42),
               dropoff=(50.09, 14.44), responses=("accept",),
               driver_ids=None, driver_pos=(50.081, 14.421),
               completed=None, selected=None):
    """Small-order builder; responses drive completion by default."""
    if driver_ids is None:
        driver_ids = [f"d{i}" for i in range(len(responses))]
    reqs = tuple(
        DriverRequest(d, GeoPoint(*driver_pos), DriverResponse(r))
        for d, r in zip(driver_ids, responses))
    accepts = [d for d, r in zip(driver_ids, responses) if r == "accept"]
    if completed is None:
        completed = bool(accepts)
    if completed and selected is None:
        selected = accepts[0]
    return RideOrder(
        order_id=order_id, timestamp=ts, pickup=GeoPoint(*pickup),
        dropoff=None if dropoff is None else GeoPoint(*dropoff),
        requests=reqs, completed=completed, selected_driver=selected)


def constant_trail(driver_id, lat, lon, t0, t1, cadence=20):
    ts = list(range(t0, t1 + 1, cadence))
    return DriverTrail(driver_id, ts, [lat] * len(ts), [lon] * len(ts))


@pytest.fixture
def micro_paths():
    return (FIXTURES / "micro_orders.jsonl", FIXTURES / "micro_trails.csv",
            FIXTURES / "micro_model.json", FIXTURES / "micro_expected.json")
