"""Convex-hull measures and neutral-cluster selection.

The neutral cluster is the attribute centroid whose removal keeps the hull of
the remaining centroids largest: removing an interior point changes nothing,
removing a vertex shrinks the hull, so the argmax is the most interior point.

Hull volumes come from Quickhull (scipy/qhull). Degenerate sets fall back in
two stages: coplanar centroid sets are projected onto their best-fit plane and
compared by 2-D hull area; sets too small or too flat even for that are
compared by the total pairwise distance of the remaining points.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from emodistill.errors import GeometryError

_DEGENERATE_EPS = 1e-12


def _check_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise GeometryError(f"expected [n, 3] points, got shape {pts.shape}")
    if len(pts) < 1:
        raise GeometryError("need at least one point")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite coordinates")
    return pts


def hull_measure(points) -> float:
    """3-D convex hull volume; 0 for degenerate (<=3 points or coplanar) sets."""
    pts = _check_points(points)
    if len(pts) <= 3 or len(np.unique(pts, axis=0)) <= 3:
        return 0.0
    try:
        return float(ConvexHull(pts).volume)
    except QhullError:
        return 0.0


def _planar_area(pts: np.ndarray) -> float:
    """Hull area of the points projected onto their best-fit (principal) plane."""
    if len(pts) <= 2 or len(np.unique(pts, axis=0)) <= 2:
        return 0.0
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    coords = centered @ vt[:2].T
    try:
        return float(ConvexHull(coords).volume)  # in 2-D, .volume is the area
    except QhullError:
        return 0.0


def _pairwise_spread(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2)).sum() / 2.0)


def leave_one_out_scores(points) -> tuple[np.ndarray, str]:
    """Leave-one-out measure per index and the mode used (volume/area/spread)."""
    pts = _check_points(points)
    m = len(pts)
    if m < 2:
        raise GeometryError("need at least two centroids to pick a neutral one")
    if m >= 4 and hull_measure(pts) >= _DEGENERATE_EPS:
        mode = "volume"
        measure = hull_measure
    elif m >= 4 and _planar_area(pts) >= _DEGENERATE_EPS:
        mode = "area"
        measure = _planar_area
    else:
        mode = "spread"
        measure = _pairwise_spread
    scores = np.array([measure(np.delete(pts, i, axis=0)) for i in range(m)])
    return scores, mode


def find_neutral(points) -> int:
    """Index of the neutral centroid: argmax of the leave-one-out hull measure.

    Ties go to the point nearest the mean of the set, then to the lowest index.
    """
    pts = _check_points(points)
    scores, _ = leave_one_out_scores(pts)
    best = scores.max()
    tol = _DEGENERATE_EPS * max(1.0, abs(best))
    tied = np.flatnonzero(scores >= best - tol)
    if len(tied) == 1:
        return int(tied[0])
    center_dist = np.linalg.norm(pts[tied] - pts.mean(axis=0), axis=1)
    return int(tied[np.argmin(center_dist)])
