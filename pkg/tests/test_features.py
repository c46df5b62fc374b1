import math

import numpy as np
import pytest

from sidmaf import (
    Dataset,
    DriverRequest,
    DriverResponse,
    GeoPoint,
    build_histories,
    build_matrix,
    extract,
    geo_distance_km,
    prague_center,
)
from sidmaf.features import FEATURE_NAMES, MISSING_DISTANCE, local_hour_day, \
    read_matrix_csv, write_matrix_csv

from conftest import make_order

PRAGUE_BOX = dict(lat=(49.95, 50.18), lon=(14.22, 14.71))


def random_point(rng):
    return GeoPoint(rng.uniform(*PRAGUE_BOX["lat"]), rng.uniform(*PRAGUE_BOX["lon"]))


class TestGeoDistance:
    def test_identity(self):
        p = GeoPoint(50.0, 14.0)
        assert geo_distance_km(p, p) == 0.0

    def test_symmetry_random(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            a, b = random_point(rng), random_point(rng)
            assert geo_distance_km(a, b) == pytest.approx(
                geo_distance_km(b, a), abs=1e-9)

    def test_equal_legs_when_dx_equals_dy(self):
        # pick offsets so the east leg and north leg have equal planar length
        lat0, lon0 = 50.0, 14.0
        d_lon = 0.01
        east = GeoPoint(lat0, lon0 + d_lon)
        dx = d_lon * math.cos(math.radians(lat0 + 0)) * 111.320
        # north displacement giving the same km, adjusted so mean-lat drift
        # is negligible at this scale
        d_lat = dx / 110.574
        north = GeoPoint(lat0 + d_lat, lon0)
        a = GeoPoint(lat0, lon0)
        assert geo_distance_km(a, east) == pytest.approx(
            geo_distance_km(a, north), abs=1e-6)

    def test_one_degree_longitude_against_independent_formula(self):
        # independent spreadsheet-style recomputation of the two-constant form
        a = GeoPoint(50.088067, 14.420767)
        b = GeoPoint(50.088067, 15.420767)
        mean_lat_rad = 50.088067 * math.pi / 180.0
        expected = abs(15.420767 - 14.420767) * math.cos(mean_lat_rad) * 111.320
        assert geo_distance_km(a, b) == pytest.approx(expected, abs=1e-12)

    def test_triangle_random_triples(self):
        # the mean-latitude scaling makes this a near-metric: allow sub-10cm
        # slack for nearly collinear triples
        rng = np.random.default_rng(7)
        for _ in range(1000):
            a, b, c = (random_point(rng) for _ in range(3))
            assert geo_distance_km(a, c) <= (
                geo_distance_km(a, b) + geo_distance_km(b, c) + 1e-4)


class TestPragueCenter:
    def test_coordinates(self):
        c = prague_center()
        assert c.lat == pytest.approx(50.0880667, abs=1e-7)
        assert c.lon == pytest.approx(14.4207667, abs=1e-7)

    def test_purity(self):
        assert prague_center() == prague_center()


class TestHistories:
    def test_direct_count(self):
        orders = [make_order(order_id=f"o{i}", ts=i, responses=(r,),
                             driver_ids=["dx"])
                  for i, r in enumerate(["accept", "decline", "timeout", "accept"])]
        table = build_histories(Dataset(orders=orders))
        h = table.histories["dx"]
        assert (h.accepts, h.total) == (2, 4)
        assert table.rate_for("dx") == 0.5

    def test_absent_driver_falls_back_to_global_mean(self):
        orders = [make_order(responses=("accept", "decline", "decline", "decline"))]
        table = build_histories(Dataset(orders=orders))
        assert table.rate_for("never_seen") == pytest.approx(0.25)

    def test_empty_dataset(self):
        table = build_histories(Dataset(orders=[]))
        assert table.histories == {}
        assert table.rate_for("x") == 0.5


class TestExtract:
    def req(self, pos=(50.09, 14.43)):
        return DriverRequest("d1", GeoPoint(*pos), DriverResponse.ACCEPTED)

    def table(self):
        return build_histories(Dataset(orders=[make_order()]))

    def test_pickup_at_center(self):
        c = prague_center()
        order = make_order(pickup=(c.lat, c.lon))
        fv = extract(order, self.req(), self.table())
        assert fv.pickup_center == 0.0

    def test_missing_dropoff_sentinels(self):
        order = make_order(dropoff=None)
        fv = extract(order, self.req(), self.table())
        assert fv.ride_distance == MISSING_DISTANCE
        assert fv.ride_center == MISSING_DISTANCE

    def test_monday_midnight_prague(self):
        # 2015-06-01 00:00:00 Europe/Prague == 2015-05-31 22:00:00 UTC
        ts = 1433109600
        assert local_hour_day(ts) == (0, 0)
        order = make_order(ts=ts)
        fv = extract(order, self.req(), self.table())
        assert (fv.hour, fv.day) == (0, 0)

    def test_purity(self):
        order = make_order()
        table = self.table()
        assert extract(order, self.req(), table) == extract(order, self.req(), table)


class TestMatrix:
    def test_no_nan_and_ranges(self):
        from sidmaf import SyntheticConfig, generate_synthetic
        d = generate_synthetic(SyntheticConfig(n_drivers=8, n_orders=60,
                                               dropoff_prob=0.7), seed=2)
        X, y = build_matrix(d)
        assert not np.isnan(X).any()
        dist_cols = X[:, [0, 1, 2, 3]]
        assert np.all((dist_cols >= 0) | (dist_cols == MISSING_DISTANCE))
        assert np.all((X[:, 4] >= 0) & (X[:, 4] <= 23))
        assert np.all((X[:, 5] >= 0) & (X[:, 5] <= 6))
        assert np.all((X[:, 6] >= 0) & (X[:, 6] <= 1))
        assert set(np.unique(y)) <= {0, 1}

    def test_csv_round_trip(self, tmp_path):
        from sidmaf import SyntheticConfig, generate_synthetic
        d = generate_synthetic(SyntheticConfig(n_drivers=5, n_orders=20), seed=4)
        X, y = build_matrix(d)
        p = tmp_path / "features.csv"
        write_matrix_csv(X, y, p)
        header = p.read_text().splitlines()[0]
        assert header == ",".join(FEATURE_NAMES) + ",label"
        X2, y2 = read_matrix_csv(p)
        np.testing.assert_allclose(X2, X, rtol=1e-9)
        assert np.array_equal(y2, y)
