import math

import pytest

from snowpath.geo import EARTH_RADIUS_M, GeoPoint, haversine_distance, offset_geo

ORIGIN = GeoPoint(lat=40.44, lon=-79.99)


def test_haversine_distance_of_same_point() -> None:
    assert haversine_distance(ORIGIN, ORIGIN) == 0.0


def test_haversine_distance_of_one_degree() -> None:
    distance = haversine_distance(GeoPoint(lat=0.0, lon=0.0), GeoPoint(lat=1.0, lon=0.0))
    assert distance == pytest.approx(math.pi / 180.0 * EARTH_RADIUS_M)


def test_haversine_distance_is_symmetric() -> None:
    other = GeoPoint(lat=40.45, lon=-79.95)
    assert haversine_distance(ORIGIN, other) == haversine_distance(other, ORIGIN)


def test_offset_geo_north() -> None:
    moved = offset_geo(ORIGIN, north_m=100.0, east_m=0.0)
    assert moved.lon == ORIGIN.lon
    assert haversine_distance(ORIGIN, moved) == pytest.approx(100.0, abs=1e-6)


def test_offset_geo_east() -> None:
    moved = offset_geo(ORIGIN, north_m=0.0, east_m=100.0)
    assert moved.lat == ORIGIN.lat
    assert haversine_distance(ORIGIN, moved) == pytest.approx(100.0, rel=1e-3)


@pytest.mark.parametrize("lat, lon", [(91.0, 0.0), (-90.5, 0.0), (0.0, 180.5)])
def test_geo_point_out_of_range(lat: float, lon: float) -> None:
    with pytest.raises(ValueError):
        GeoPoint(lat=lat, lon=lon)
