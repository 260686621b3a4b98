import numpy as np
import pytest

from emodistill.cluster import kmeans
from emodistill.errors import ClusterError
from oracles import cluster_purity


def test_two_cluster_symmetry():
    points = np.array([[0.0], [0.0], [1.0], [1.0]])
    labels, centers = kmeans(points, 2, seed=0)
    assert labels[0] == labels[1]
    assert labels[2] == labels[3]
    assert labels[0] != labels[2]
    assert sorted(c[0] for c in centers) == [0.0, 1.0]


def test_well_separated_blobs_have_unit_purity(rng):
    centers = rng.normal(0, 10, size=(5, 16))
    truth = np.repeat(np.arange(5), 30)
    points = centers[truth] + rng.normal(0, 0.1, size=(150, 16))
    labels, _ = kmeans(points, 5, seed=3)
    assert cluster_purity(labels, truth) == 1.0


def test_deterministic_given_seed(rng):
    points = rng.normal(size=(60, 8))
    a_labels, a_centers = kmeans(points, 4, seed=11)
    b_labels, b_centers = kmeans(points, 4, seed=11)
    np.testing.assert_array_equal(a_labels, b_labels)
    np.testing.assert_array_equal(a_centers, b_centers)


def test_too_few_points_rejected(rng):
    with pytest.raises(ClusterError, match="cannot form"):
        kmeans(rng.normal(size=(3, 4)), 5)


def test_degenerate_identical_points_rejected():
    with pytest.raises(ClusterError, match="distinct"):
        kmeans(np.ones((10, 3)), 3)


def test_no_empty_clusters(rng):
    # heavily imbalanced data still yields k non-empty clusters
    points = np.concatenate([rng.normal(0, 0.01, size=(50, 2)), [[5.0, 5.0], [5.1, 5.0]]])
    labels, _ = kmeans(points, 3, seed=2)
    assert len(np.unique(labels)) == 3
