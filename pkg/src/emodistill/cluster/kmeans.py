"""Plain k-means with k-means++ seeding.

Hand-rolled rather than delegated so the contract is exact: deterministic
given the seed, empty clusters re-seeded from the farthest point, convergence
on centroid movement below tolerance.
"""

from __future__ import annotations

import numpy as np

from emodistill.errors import ClusterError


def _pairwise_sq(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||p - c||^2 without forming the full difference tensor
    p2 = np.sum(points * points, axis=1)[:, None]
    c2 = np.sum(centers * centers, axis=1)[None, :]
    return np.maximum(p2 + c2 - 2.0 * points @ centers.T, 0.0)


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = _pairwise_sq(points, centers[:1]).ravel()
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # remaining mass degenerate; pick any point not yet chosen
            centers[i] = points[rng.integers(n)]
            continue
        centers[i] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, _pairwise_sq(points, centers[i : i + 1]).ravel())
    return centers


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Cluster ``points`` [n, d] into ``k`` groups; returns (labels, centers).

    Raises :class:`ClusterError` when there are fewer points than clusters or
    fewer distinct points than clusters.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ClusterError(f"points must be 2-D, got shape {points.shape}")
    n = len(points)
    if k < 2:
        raise ClusterError(f"cluster count must be >= 2, got {k}")
    if n < k:
        raise ClusterError(f"cannot form {k} clusters from {n} points")
    if len(np.unique(points, axis=0)) < k:
        raise ClusterError(f"fewer than {k} distinct points; clusters would be degenerate")

    rng = np.random.default_rng(seed)
    centers = _plusplus_init(points, k, rng)
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = _pairwise_sq(points, centers)
        labels = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            mask = labels == c
            if mask.any():
                new_centers[c] = points[mask].mean(axis=0)
        # re-seed empty clusters from the point farthest from its center
        for c in range(k):
            if not (labels == c).any():
                far = int(np.argmax(d2[np.arange(n), labels]))
                new_centers[c] = points[far]
                labels[far] = c
                d2[far, :] = 0.0
        movement = np.linalg.norm(new_centers - centers, axis=1).max()
        centers = new_centers
        if movement < tol:
            break
    d2 = _pairwise_sq(points, centers)
    labels = np.argmin(d2, axis=1)
    for c in range(k):
        if not (labels == c).any():
            far = int(np.argmax(d2[np.arange(n), labels]))
            labels[far] = c
    return labels, centers
