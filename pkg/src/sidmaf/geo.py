"""Planar distance helpers for the Prague operating area.

Distances are computed with an equirectangular approximation: one degree
of latitude is 110.574 km, one degree of longitude is 111.320 km scaled
by cos(mean latitude). Within a ~30 km city radius the error against the
great-circle distance is below 0.1%, which is good enough for dispatch
features.
"""

import math

import numpy as np

KM_PER_DEG_LAT = 110.574
KM_PER_DEG_LON = 111.320

# N50 5.284' E14 25.246', arcminutes converted to decimal degrees
CITY_CENTER_LAT = 50.0 + 5.284 / 60.0
CITY_CENTER_LON = 14.0 + 25.246 / 60.0


def geo_distance_km(a, b) -> float:
    """Equirectangular distance in km between two (lat, lon) points."""
    mean_lat = math.radians((a.lat + b.lat) / 2.0)
    dx = (b.lon - a.lon) * math.cos(mean_lat) * KM_PER_DEG_LON
    dy = (b.lat - a.lat) * KM_PER_DEG_LAT
    return math.hypot(dx, dy)


def geo_distance_km_arrays(lat1, lon1, lat2, lon2):
    """Vectorized equirectangular distance; inputs broadcast like numpy."""
    mean_lat = np.radians((np.asarray(lat1) + np.asarray(lat2)) / 2.0)
    dx = (np.asarray(lon2) - np.asarray(lon1)) * np.cos(mean_lat) * KM_PER_DEG_LON
    dy = (np.asarray(lat2) - np.asarray(lat1)) * KM_PER_DEG_LAT
    return np.hypot(dx, dy)


def km_to_deg_lat(km: float) -> float:
    return km / KM_PER_DEG_LAT


def km_to_deg_lon(km: float, at_lat: float) -> float:
    return km / (KM_PER_DEG_LON * math.cos(math.radians(at_lat)))
