"""Coordinates, great-circle distance and accuracy-at-radius evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from semgeo import kernels
from semgeo.errors import InputError

#: Mean Earth radius (IUGG), km.
EARTH_RADIUS_KM = 6371.0088

#: Radii of the standard geolocation benchmark columns, km.
DEFAULT_RADII_KM = (1.0, 25.0, 200.0, 750.0, 2500.0)


@dataclass(frozen=True)
class GeoCoordinate:
    """A latitude/longitude pair in degrees.

    Longitude is normalized at construction so that +180 maps to -180;
    values outside [-180, 180] are rejected rather than wrapped.
    """

    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        lat = float(self.lat_deg)
        lon = float(self.lon_deg)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise InputError(f"non-finite coordinate ({self.lat_deg}, {self.lon_deg})")
        if not -90.0 <= lat <= 90.0:
            raise InputError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise InputError(f"longitude {lon} outside [-180, 180]")
        if lon == 180.0:
            lon = -180.0
        object.__setattr__(self, "lat_deg", lat)
        object.__setattr__(self, "lon_deg", lon)

    def __iter__(self):
        yield self.lat_deg
        yield self.lon_deg


def great_circle_distance(a: GeoCoordinate, b: GeoCoordinate, radius_km: float = EARTH_RADIUS_KM) -> float:
    """Haversine distance in km between two coordinates."""
    lat1 = math.radians(a.lat_deg)
    lat2 = math.radians(b.lat_deg)
    sdlat = math.sin((lat2 - lat1) / 2.0)
    sdlon = math.sin(math.radians(b.lon_deg - a.lon_deg) / 2.0)
    h = sdlat * sdlat + math.cos(lat1) * math.cos(lat2) * sdlon * sdlon
    h = min(max(h, 0.0), 1.0)
    return 2.0 * radius_km * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))


def distances_km(gt: np.ndarray, pred: np.ndarray, radius_km: float = EARTH_RADIUS_KM) -> np.ndarray:
    """Vectorized distance between two ``(n, 2)`` arrays of (lat, lon) rows."""
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 2)
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    if gt.shape != pred.shape:
        raise InputError(f"shape mismatch {gt.shape} vs {pred.shape}")
    return kernels.haversine_km(gt[:, 0], gt[:, 1], pred[:, 0], pred[:, 1], radius_km)


@dataclass(frozen=True)
class AccuracyEntry:
    radius_km: float
    accuracy: float
    n: int


@dataclass(frozen=True)
class AccuracyTable:
    entries: tuple[AccuracyEntry, ...]

    def __getitem__(self, radius_km: float) -> float:
        for e in self.entries:
            if e.radius_km == radius_km:
                return e.accuracy
        raise KeyError(radius_km)

    @property
    def radii(self) -> tuple[float, ...]:
        return tuple(e.radius_km for e in self.entries)

    def as_percent(self) -> dict[float, float]:
        return {e.radius_km: 100.0 * e.accuracy for e in self.entries}


def _check_radii(radii_km: Sequence[float]) -> list[float]:
    radii = [float(r) for r in radii_km]
    if not radii:
        raise InputError("radius list is empty")
    if any(not r > 0 for r in radii):
        raise InputError(f"radii must be positive: {radii}")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise InputError(f"radii must be strictly increasing: {radii}")
    return radii


def accuracy_from_errors(errors_km: Iterable[float], radii_km: Sequence[float] = DEFAULT_RADII_KM) -> AccuracyTable:
    """Fraction of errors strictly below each radius."""
    radii = _check_radii(radii_km)
    if not hasattr(errors_km, "__len__"):
        errors_km = list(errors_km)
    errors = np.sort(np.asarray(errors_km, dtype=np.float64).ravel())
    n = errors.shape[0]
    if n == 0:
        raise InputError("cannot compute accuracy over zero samples")
    # side="left" counts elements < r, so samples exactly at r are excluded
    below = np.searchsorted(errors, radii, side="left")
    return AccuracyTable(tuple(AccuracyEntry(r, int(c) / n, n) for r, c in zip(radii, below)))


def accuracy_at(
    samples: Sequence[tuple[GeoCoordinate, GeoCoordinate]],
    radii_km: Sequence[float] = DEFAULT_RADII_KM,
) -> AccuracyTable:
    """Geolocational accuracy over ``(ground_truth, prediction)`` pairs."""
    if len(samples) == 0:
        raise InputError("cannot compute accuracy over zero samples")
    gt = np.array([(g.lat_deg, g.lon_deg) for g, _ in samples], dtype=np.float64)
    pred = np.array([(p.lat_deg, p.lon_deg) for _, p in samples], dtype=np.float64)
    return accuracy_from_errors(distances_km(gt, pred), radii_km)
