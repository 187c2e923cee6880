"""Tests for k-means++, k-means, k-medoids and distortion-ratio K selection."""

import itertools
import logging

import numpy as np
import pytest

from level_synth.analysis.clustering import (
    alpha_weights,
    distortion_ratio_k,
    estimate_k,
    estimate_k_from_distances,
    kmeans,
    kmeans_auto,
    kmeanspp_seed,
    kmedoids,
    kmedoids_from_distances,
    pairwise_distances,
)
from level_synth.errors import ClusteringError

logger = logging.getLogger(__name__)

SQUARE = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
LINE = [0, 1, 2, 100, 101, 102]


def _distortion(X, labels, k):
    return sum(((X[labels == j] - X[labels == j].mean(axis=0)) ** 2).sum() for j in range(k))


def _brute_force_optimum(X, k):
    """Lowest distortion over every labeling with k non-empty clusters."""
    n = len(X)
    labelings = np.array(list(itertools.product(range(k), repeat=n)))
    full = np.all([(labelings == j).any(axis=1) for j in range(k)], axis=0)
    labelings = labelings[full]
    sq_norms = (X * X).sum(axis=1)
    total = np.zeros(len(labelings))
    for j in range(k):
        mask = (labelings == j).astype(np.float64)
        counts = mask.sum(axis=1)
        sums = mask @ X
        total += mask @ sq_norms - (sums * sums).sum(axis=1) / counts
    return float(total.min())


def test_kmeans_square_example():
    result = kmeans(SQUARE, 2, rng_seed=0)
    assert result.distortion == pytest.approx(1.0)
    assert sorted(sorted(result.members(j)) for j in range(2)) == [[0, 1], [2, 3]]
    np.testing.assert_allclose(sorted(result.centers.tolist()), [[0.0, 0.5], [10.0, 0.5]])


def test_kmeans_identical_points():
    X = np.ones((6, 3))
    for k in (1, 3, 6):
        result = kmeans(X, k, rng_seed=1)
        assert result.distortion == 0.0
        assert len(result.sizes()) == k and min(result.sizes()) >= 1


def test_kmeans_single_cluster_is_mean():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(15, 4))
    result = kmeans(X, 1, rng_seed=0)
    np.testing.assert_allclose(result.centers[0], X.mean(axis=0))
    assert result.distortion == pytest.approx(((X - X.mean(axis=0)) ** 2).sum())


def test_kmeans_is_one_stable():
    rng = np.random.default_rng(4)
    for _ in range(25):
        n = int(rng.integers(4, 14))
        k = int(rng.integers(1, 4))
        X = rng.normal(size=(n, 2)) * rng.uniform(0.5, 5.0)
        result = kmeans(X, k, rng_seed=int(rng.integers(1000)))
        for i in range(n):
            if result.sizes()[result.labels[i]] == 1:
                continue
            for j in range(k):
                moved = result.labels.copy()
                moved[i] = j
                assert _distortion(X, moved, k) >= result.distortion - 1e-9


def test_kmeans_close_to_brute_force_optimum():
    rng = np.random.default_rng(6)
    failures = 0
    trials = 40
    for _ in range(trials):
        n = int(rng.integers(3, 8))
        k = int(rng.integers(1, min(3, n) + 1))
        X = rng.uniform(0, 10, size=(n, 2))
        optimum = _brute_force_optimum(X, k)
        result = kmeans(X, k, rng_seed=int(rng.integers(1000)))
        if result.distortion > 1.2 * optimum + 1e-9:
            failures += 1
            logger.info(f"n={n} k={k}: {result.distortion:.4f} vs optimum {optimum:.4f}")
    assert failures <= 0.05 * trials


def test_kmeans_is_deterministic():
    X = np.random.default_rng(8).normal(size=(20, 3))
    a = kmeans(X, 3, rng_seed=11)
    b = kmeans(X, 3, rng_seed=11)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.distortion == b.distortion


def test_kmeans_rejects_bad_k():
    with pytest.raises(ClusteringError):
        kmeans(SQUARE, 5, rng_seed=0)
    with pytest.raises(ClusteringError):
        kmeans(SQUARE, 0, rng_seed=0)


def test_kmeanspp_seeds_are_distinct_input_points():
    X = np.random.default_rng(3).normal(size=(12, 2))
    centers = kmeanspp_seed(X, 4, rng_seed=5)
    assert centers.shape == (4, 2)
    rows = {tuple(row) for row in X.tolist()}
    assert all(tuple(c) in rows for c in centers.tolist())
    assert len({tuple(c) for c in centers.tolist()}) == 4
    np.testing.assert_array_equal(centers, kmeanspp_seed(X, 4, rng_seed=5))


def test_kmedoids_line_example():
    result = kmedoids(LINE, 2, lambda a, b: abs(a - b), rng_seed=0)
    assert sorted(LINE[m] for m in result.medoids) == [1, 101]
    assert result.distortion == pytest.approx(4.0)


def test_kmedoids_is_swap_stable():
    rng = np.random.default_rng(12)
    for _ in range(20):
        n = int(rng.integers(3, 12))
        k = int(rng.integers(1, min(4, n) + 1))
        points = rng.uniform(0, 20, size=(n, 2))
        D = pairwise_distances(list(points), lambda a, b: float(np.linalg.norm(a - b)))
        result = kmedoids_from_distances(D, k, rng_seed=int(rng.integers(1000)))
        sq = D * D
        for p, o in itertools.product(range(k), range(n)):
            if o in result.medoids:
                continue
            swapped = list(result.medoids)
            swapped[p] = o
            cost = sq[:, swapped].min(axis=1).sum()
            assert cost >= result.distortion - 1e-9


def test_pairwise_distances_symmetric():
    D = pairwise_distances(LINE, lambda a, b: abs(a - b))
    np.testing.assert_array_equal(D, D.T)
    assert D[0, 5] == 102 and np.all(np.diag(D) == 0)


def test_alpha_weights():
    alphas = alpha_weights(4, 2.0)
    assert alphas[2] == pytest.approx(0.625)
    assert alphas[3] == pytest.approx(0.625 + 0.375 / 6)
    assert alphas[4] == pytest.approx(alphas[3] + (1 - alphas[3]) / 6)


def test_distortion_ratio_selection():
    assert distortion_ratio_k([100.0, 1.0, 0.9], dimensionality=2) == 2
    assert distortion_ratio_k([10.0, 9.0, 8.5], dimensionality=2) == 1
    assert distortion_ratio_k([0.0, 0.0], dimensionality=2) == 1
    assert distortion_ratio_k([5.0], dimensionality=2) == 1


def test_estimate_k_identical_points():
    assert estimate_k(np.zeros((8, 2)), k_max=5, rng_seed=0) == 1


def test_estimate_k_two_blobs():
    rng = np.random.default_rng(0)
    left = rng.normal(0.0, 0.1, size=(15, 2))
    right = rng.normal(0.0, 0.1, size=(15, 2)) + [100.0, 0.0]
    X = np.vstack([left, right])
    assert estimate_k(X, k_max=6, rng_seed=1) == 2
    result = kmeans_auto(X, k_max=6, rng_seed=1)
    assert sorted(result.sizes()) == [15, 15]


def test_estimate_k_from_distances_two_groups():
    items = [0.0, 0.1, 0.2, 0.15, 50.0, 50.1, 50.2, 50.05]
    D = pairwise_distances(items, lambda a, b: abs(a - b))
    assert estimate_k_from_distances(D, k_max=4, rng_seed=0) == 2


def test_k_max_clamped_to_point_count():
    X = np.array([[0.0], [5.0]])
    assert kmeans_auto(X, k_max=10, rng_seed=0).k <= 2
