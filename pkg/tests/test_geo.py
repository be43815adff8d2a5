import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import count_below, haversine_asin
from semgeo.errors import InputError
from semgeo.geo import (DEFAULT_RADII_KM, EARTH_RADIUS_KM, GeoCoordinate, accuracy_at,
                        accuracy_from_errors, distances_km, great_circle_distance)

lat_s = st.floats(-90, 90, allow_nan=False)
lon_s = st.floats(-180, 180, allow_nan=False)
coord_s = st.builds(GeoCoordinate, lat_s, lon_s)

# frozen from oracles.haversine_asin (asin form, R = 6371.0088 km)
PARIS_LONDON_KM = 343.55653488088313


def test_identity_is_zero():
    assert great_circle_distance(GeoCoordinate(0, 0), GeoCoordinate(0, 0)) == 0.0


def test_antipodal_is_half_circumference():
    d = great_circle_distance(GeoCoordinate(0, 0), GeoCoordinate(0, 180))
    assert d == pytest.approx(math.pi * EARTH_RADIUS_KM, rel=1e-12)


def test_paris_london_matches_oracle():
    d = great_circle_distance(GeoCoordinate(48.8566, 2.3522), GeoCoordinate(51.5074, -0.1278))
    assert d == pytest.approx(PARIS_LONDON_KM, rel=1e-6)


def test_longitude_normalization():
    assert GeoCoordinate(10, 180).lon_deg == -180.0
    assert GeoCoordinate(10, -180).lon_deg == -180.0


@pytest.mark.parametrize("lat,lon", [(91, 0), (-90.5, 0), (0, 180.1), (float("nan"), 0)])
def test_invalid_coordinates_rejected(lat, lon):
    with pytest.raises(InputError):
        GeoCoordinate(lat, lon)


@given(coord_s, coord_s)
def test_symmetric_and_bounded(a, b):
    d1 = great_circle_distance(a, b)
    assert d1 == great_circle_distance(b, a)
    assert 0.0 <= d1 <= math.pi * EARTH_RADIUS_KM * (1 + 1e-12)


@settings(max_examples=300)
@given(coord_s, coord_s, coord_s)
def test_triangle_inequality(a, b, c):
    assert great_circle_distance(a, c) <= great_circle_distance(a, b) + great_circle_distance(b, c) + 1e-9


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(3)
    gt = np.column_stack([rng.uniform(-90, 90, 200), rng.uniform(-180, 180, 200)])
    pr = np.column_stack([rng.uniform(-90, 90, 200), rng.uniform(-180, 180, 200)])
    vec = distances_km(gt, pr)
    for i in range(200):
        assert vec[i] == pytest.approx(haversine_asin(*gt[i], *pr[i]), rel=1e-9)


def test_accuracy_all_exact():
    c = GeoCoordinate(12.5, 41.9)
    t = accuracy_at([(c, c)] * 7)
    assert t.radii == DEFAULT_RADII_KM
    assert all(e.accuracy == 1.0 and e.n == 7 for e in t.entries)


def test_accuracy_hand_placed_errors():
    errors = [0.5, 2, 30, 100, 800, 3000, 24.999, 25.0, 200.0, 1.0]
    t = accuracy_from_errors(errors)
    for r in DEFAULT_RADII_KM:
        assert t[r] == count_below(errors, r) / len(errors)
    # boundary samples at exactly r do not count
    assert t[25.0] == 4 / 10
    assert t[1.0] == 1 / 10


def test_accuracy_from_pairs_uses_gcd():
    gt = GeoCoordinate(0.0, 0.0)
    # about 111.2 km per degree along the equator
    preds = [GeoCoordinate(0.0, d) for d in (0.0, 0.1, 1.0, 5.0, 30.0)]
    t = accuracy_at([(gt, p) for p in preds])
    assert t[1.0] == 0.2
    assert t[25.0] == 0.4
    assert t[200.0] == 0.6
    assert t[750.0] == 0.8
    assert t[2500.0] == 0.8


def test_accuracy_errors():
    with pytest.raises(InputError):
        accuracy_at([])
    with pytest.raises(InputError):
        accuracy_from_errors([1.0], [25, 1])
    with pytest.raises(InputError):
        accuracy_from_errors([1.0], [])


def test_accuracy_infinite_radius_is_one():
    t = accuracy_from_errors([0.0, 10.0, 20000.0], [1.0, math.inf])
    assert t[math.inf] == 1.0


@given(st.lists(st.floats(0, 21000), min_size=1, max_size=50))
def test_accuracy_monotone(errors):
    acc = [e.accuracy for e in accuracy_from_errors(errors).entries]
    assert acc == sorted(acc)
