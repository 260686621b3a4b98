"""Spherical coordinates around the neutral centroid.

Attribute points are stored as (arousal, valence, dominance); the spherical
frame maps them to Cartesian axes as x = valence, y = arousal, z = dominance.
Azimuth is measured in the x-y plane, elevation from it; the azimuth at the
poles (elevation ±pi/2) is reported as 0 by convention.
"""

from __future__ import annotations

import numpy as np

from emodistill.errors import GeometryError

_RADIUS_EPS = 1e-12


def avd_to_xyz(point) -> np.ndarray:
    """(arousal, valence, dominance) -> (x, y, z) = (valence, arousal, dominance)."""
    a, v, d = np.asarray(point, dtype=np.float64)
    return np.array([v, a, d])


def to_spherical(point, origin) -> tuple[float, float, float]:
    """Returns (azimuth, elevation, radius) of ``point`` relative to ``origin``.

    Both arguments are (x, y, z) Cartesian points. Raises when the two
    coincide (the direction would be undefined).
    """
    p = np.asarray(point, dtype=np.float64)
    o = np.asarray(origin, dtype=np.float64)
    if p.shape != (3,) or o.shape != (3,):
        raise GeometryError("to_spherical expects 3-D points")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(o))):
        raise GeometryError("non-finite coordinates")
    d = p - o
    radius = float(np.linalg.norm(d))
    if radius < _RADIUS_EPS:
        raise GeometryError("point coincides with origin; azimuth undefined")
    elevation = float(np.arcsin(np.clip(d[2] / radius, -1.0, 1.0)))
    if abs(d[0]) < _RADIUS_EPS * radius and abs(d[1]) < _RADIUS_EPS * radius:
        azimuth = 0.0  # pole convention
    else:
        azimuth = float(np.arctan2(d[1], d[0]))
    return azimuth, elevation, radius


def from_spherical(azimuth: float, elevation: float, radius: float, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    o = np.asarray(origin, dtype=np.float64)
    return o + radius * direction(azimuth, elevation)


def direction(azimuth: float, elevation: float) -> np.ndarray:
    """Unit vector for (azimuth, elevation)."""
    ce = np.cos(elevation)
    return np.array([ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)])


def angular_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """1 - cos(great-circle angle) between two (azimuth, elevation) directions."""
    az_a, el_a = a
    az_b, el_b = b
    cos_gamma = np.sin(el_a) * np.sin(el_b) + np.cos(el_a) * np.cos(el_b) * np.cos(az_a - az_b)
    return float(1.0 - np.clip(cos_gamma, -1.0, 1.0))
