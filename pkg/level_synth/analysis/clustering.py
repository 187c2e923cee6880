"""Clustering primitives: k-means++ seeding, k-means, k-medoids, and K selection.

K is chosen with the distortion ratio f(K)::

    f(1) = 1
    f(K) = S_K / (a_K * S_{K-1})
    a_2 = 1 - 3 / (4d),  a_K = a_{K-1} + (1 - a_{K-1}) / 6

where S_K is the clustering distortion at K and d the dimensionality; the
smallest K with f(K) below the threshold is selected, otherwise 1.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy.spatial.distance import cdist

from level_synth.errors import ClusteringError

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Relative slack below which a move or swap is not counted as an improvement.
IMPROVEMENT_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class ClusterResult:
    """Assignment of n elements to k non-empty clusters.

    ``centers`` holds the k mean vectors for k-means; ``medoids`` holds the
    k medoid element indices (ascending) for k-medoids.
    """

    k: int
    labels: np.ndarray
    distortion: float
    centers: Optional[np.ndarray] = None
    medoids: Optional[Tuple[int, ...]] = None

    def members(self, cluster: int) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.labels == cluster)]

    def sizes(self) -> List[int]:
        return [int(n) for n in np.bincount(self.labels, minlength=self.k)]


def _check_k(n: int, k: int) -> None:
    if n < 1:
        raise ClusteringError("Cannot cluster an empty point set")
    if k < 1 or k > n:
        raise ClusteringError(f"k={k} is not in [1, {n}]")


def _seed_indices(sqdist: np.ndarray, k: int, rng: np.random.Generator) -> List[int]:
    """D^2 sampling over a squared-distance matrix.

    When every remaining point coincides with a chosen one the D^2 weights
    vanish; the next center is then drawn uniformly from the unchosen points.
    """
    n = sqdist.shape[0]
    chosen = [int(rng.integers(n))]
    nearest = sqdist[chosen[0]].astype(np.float64).copy()
    while len(chosen) < k:
        total = nearest.sum()
        if total > 0:
            pick = int(rng.choice(n, p=nearest / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            pick = int(rng.choice(free))
        chosen.append(pick)
        nearest = np.minimum(nearest, sqdist[pick])
    return chosen


def kmeanspp_seed(points: np.ndarray, k: int, rng_seed: int) -> np.ndarray:
    """Pick k initial centers from ``points`` with k-means++ seeding.

    Args:
        points: (n, d) array
        k: Number of centers, 1 <= k <= n
        rng_seed: Seed; equal seeds give equal centers

    Returns:
        (k, d) array of chosen points
    """
    X = np.asarray(points, dtype=np.float64)
    _check_k(len(X), k)
    rng = np.random.default_rng(rng_seed)
    return X[_seed_indices(cdist(X, X, "sqeuclidean"), k, rng)].copy()


def _vector_distortion(X: np.ndarray, labels: np.ndarray, k: int) -> Tuple[np.ndarray, float]:
    centers = np.stack([X[labels == j].mean(axis=0) for j in range(k)])
    return centers, float(((X - centers[labels]) ** 2).sum())


def _hartigan_refine(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Move single points between clusters while that lowers distortion.

    Moving x from A to B changes the distortion by
    ``|B|/(|B|+1) |x-c_B|^2 - |A|/(|A|-1) |x-c_A|^2``.
    """
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.stack([X[labels == j].sum(axis=0) for j in range(k)])
    moved = True
    while moved:
        moved = False
        for i, x in enumerate(X):
            a = labels[i]
            if counts[a] <= 1:
                continue
            centers = sums / counts[:, None]
            sq = ((centers - x) ** 2).sum(axis=1)
            removal = counts[a] / (counts[a] - 1) * sq[a]
            gains = counts / (counts + 1) * sq
            gains[a] = np.inf
            b = int(np.argmin(gains))
            if gains[b] < removal - IMPROVEMENT_EPS * max(1.0, removal):
                labels[i] = b
                counts[a] -= 1
                counts[b] += 1
                sums[a] -= x
                sums[b] += x
                moved = True
    return labels


def _lloyd(
    X: np.ndarray, centers: np.ndarray, max_iter: int
) -> np.ndarray:
    k = len(centers)
    labels = None
    for _ in range(max_iter):
        sq = cdist(X, centers, "sqeuclidean")
        new_labels = np.argmin(sq, axis=1)
        for j in range(k):
            if (new_labels == j).any():
                continue
            # Re-seed an empty cluster with the point farthest from its center.
            own = sq[np.arange(len(X)), new_labels]
            counts = np.bincount(new_labels, minlength=k)
            own[counts[new_labels] <= 1] = -1.0
            far = int(np.argmax(own))
            new_labels[far] = j
            centers[j] = X[far]
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = np.stack([X[labels == j].mean(axis=0) for j in range(k)])
    return labels


def kmeans(
    points: np.ndarray,
    k: int,
    rng_seed: int,
    n_init: int = 10,
    max_iter: int = 100,
) -> ClusterResult:
    """Lloyd's k-means from k-means++ seeds, best of ``n_init`` restarts.

    Each restart is polished by single-point moves so the result is
    1-stable: no reassignment of one point lowers the distortion.

    Raises:
        ClusteringError: k outside [1, n]
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    _check_k(len(X), k)
    rng = np.random.default_rng(rng_seed)
    sqdist = cdist(X, X, "sqeuclidean")

    best: Optional[ClusterResult] = None
    for _ in range(n_init):
        centers = X[_seed_indices(sqdist, k, rng)].copy()
        labels = _lloyd(X, centers, max_iter)
        labels = _hartigan_refine(X, labels, k)
        centers, distortion = _vector_distortion(X, labels, k)
        if best is None or distortion < best.distortion:
            best = ClusterResult(k=k, labels=labels, distortion=distortion, centers=centers)
    return best


def pairwise_distances(items: Sequence[T], distance: Callable[[T, T], float]) -> np.ndarray:
    """Symmetric distance matrix of ``items`` under ``distance``."""
    n = len(items)
    matrix = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            matrix[i, j] = matrix[j, i] = float(distance(items[i], items[j]))
    return matrix


def _medoid_labels(sqdist: np.ndarray, medoids: List[int]) -> np.ndarray:
    labels = np.argmin(sqdist[:, medoids], axis=1)
    for j, m in enumerate(medoids):
        labels[m] = j
    return labels


def _swap_descent(sqdist: np.ndarray, medoids: List[int]) -> List[int]:
    """PAM swap phase: apply the best improving swap until none exists."""
    n = sqdist.shape[0]
    cost = sqdist[:, medoids].min(axis=1).sum()
    while True:
        best_cost, best_swap = cost, None
        is_medoid = np.zeros(n, dtype=bool)
        is_medoid[medoids] = True
        for p in range(len(medoids)):
            others = [m for q, m in enumerate(medoids) if q != p]
            rest = sqdist[:, others].min(axis=1) if others else np.full(n, np.inf)
            costs = np.minimum(rest[:, None], sqdist).sum(axis=0)
            costs[is_medoid] = np.inf
            o = int(np.argmin(costs))
            if costs[o] < best_cost - IMPROVEMENT_EPS * max(1.0, cost):
                best_cost, best_swap = costs[o], (p, o)
        if best_swap is None:
            return sorted(medoids)
        p, o = best_swap
        medoids = medoids[:p] + [o] + medoids[p + 1 :]
        cost = best_cost


def kmedoids_from_distances(
    distances: np.ndarray, k: int, rng_seed: int, n_init: int = 10
) -> ClusterResult:
    """k-medoids on a precomputed distance matrix.

    Distortion is the sum of squared distances to the assigned medoid;
    each restart seeds with D^2 sampling and runs swap descent, so the
    result is swap-stable.

    Raises:
        ClusteringError: k outside [1, n]
    """
    D = np.asarray(distances, dtype=np.float64)
    _check_k(D.shape[0], k)
    sqdist = D * D
    rng = np.random.default_rng(rng_seed)

    best: Optional[ClusterResult] = None
    for _ in range(n_init):
        medoids = _swap_descent(sqdist, _seed_indices(sqdist, k, rng))
        labels = _medoid_labels(sqdist, medoids)
        distortion = float(sqdist[np.arange(len(D)), np.asarray(medoids)[labels]].sum())
        if best is None or distortion < best.distortion:
            best = ClusterResult(k=k, labels=labels, distortion=distortion, medoids=tuple(medoids))
    return best


def kmedoids(
    items: Sequence[T],
    k: int,
    distance: Callable[[T, T], float],
    rng_seed: int,
    n_init: int = 10,
) -> ClusterResult:
    """k-medoids over arbitrary items with a symmetric distance function."""
    return kmedoids_from_distances(pairwise_distances(items, distance), k, rng_seed, n_init)


def alpha_weights(k_max: int, dimensionality: float) -> List[float]:
    """a_K for K = 0..k_max (entries 0 and 1 unused)."""
    d = max(float(dimensionality), 1.0)
    alphas = [1.0, 1.0]
    if k_max >= 2:
        alphas.append(1.0 - 3.0 / (4.0 * d))
    for _ in range(3, k_max + 1):
        alphas.append(alphas[-1] + (1.0 - alphas[-1]) / 6.0)
    return alphas


def distortion_ratio_k(
    distortions: Sequence[float], dimensionality: float, threshold: float = 0.85
) -> int:
    """Select K from distortions S_1..S_kmax (``distortions[K-1]``).

    Returns the smallest K with f(K) < threshold, K-1 as soon as
    S_{K-1} is zero, and 1 when no K qualifies.
    """
    k_max = len(distortions)
    alphas = alpha_weights(k_max, dimensionality)
    for K in range(2, k_max + 1):
        previous = distortions[K - 2]
        if previous <= 0:
            return K - 1
        f = distortions[K - 1] / (alphas[K] * previous)
        logger.debug(f"f({K}) = {f:.4f}")
        if f < threshold:
            return K
    return 1


def _clamp_k_max(n: int, k_max: int) -> int:
    if n < 1:
        raise ClusteringError("Cannot estimate K for an empty point set")
    if k_max > n:
        logger.debug(f"k_max {k_max} clamped to {n} points")
    return max(1, min(k_max, n))


def kmeans_auto(
    points: np.ndarray,
    k_max: int,
    rng_seed: int,
    fk_threshold: float = 0.85,
    n_init: int = 10,
    max_iter: int = 100,
) -> ClusterResult:
    """k-means with K chosen by the distortion ratio."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    k_max = _clamp_k_max(len(X), k_max)
    fits = [kmeans(X, k, rng_seed, n_init=n_init, max_iter=max_iter) for k in range(1, k_max + 1)]
    k = distortion_ratio_k([f.distortion for f in fits], X.shape[1], fk_threshold)
    logger.debug(f"Selected K={k} of {k_max} for {len(X)} vectors")
    return fits[k - 1]


def kmedoids_auto(
    distances: np.ndarray,
    k_max: int,
    rng_seed: int,
    dimensionality: float = 2.0,
    fk_threshold: float = 0.85,
    n_init: int = 10,
) -> ClusterResult:
    """k-medoids on a distance matrix with K chosen by the distortion ratio."""
    D = np.asarray(distances, dtype=np.float64)
    k_max = _clamp_k_max(D.shape[0], k_max)
    fits = [kmedoids_from_distances(D, k, rng_seed, n_init=n_init) for k in range(1, k_max + 1)]
    k = distortion_ratio_k([f.distortion for f in fits], dimensionality, fk_threshold)
    logger.debug(f"Selected K={k} of {k_max} for {D.shape[0]} items")
    return fits[k - 1]


def estimate_k(
    points: np.ndarray,
    k_max: int,
    rng_seed: int,
    fk_threshold: float = 0.85,
    n_init: int = 10,
) -> int:
    """Number of clusters in a vector point set by the distortion ratio."""
    return kmeans_auto(points, k_max, rng_seed, fk_threshold=fk_threshold, n_init=n_init).k


def estimate_k_from_distances(
    distances: np.ndarray,
    k_max: int,
    rng_seed: int,
    dimensionality: float = 2.0,
    fk_threshold: float = 0.85,
    n_init: int = 10,
) -> int:
    """Number of clusters in a metric point set; ``dimensionality`` stands in for d."""
    return kmedoids_auto(
        distances, k_max, rng_seed, dimensionality=dimensionality,
        fk_threshold=fk_threshold, n_init=n_init,
    ).k
