"""K-means and spectral clustering used for label inference.

Both are deterministic given a seed: k-means seeds with a farthest-point
sweep from a seeded start, and spectral clustering runs k-means on the
eigenvector embedding of the normalized graph Laplacian.
"""

import numpy as np


def _pairwise_sq_dist(points, centers):
    # (n, k): squared euclidean distances
    diff = points[:, None, :] - centers[None, :, :]
    return (diff * diff).sum(axis=2)


def farthest_point_seeds(points, k, seed):
    """First center chosen by the seed, the rest by farthest-point traversal."""
    n = points.shape[0]
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    min_d = _pairwise_sq_dist(points, points[chosen])[:, 0]
    while len(chosen) < k:
        nxt = int(np.argmax(min_d))  # ties resolve to the lowest index
        chosen.append(nxt)
        min_d = np.minimum(min_d, _pairwise_sq_dist(points, points[[nxt]])[:, 0])
    return points[chosen].copy()


def kmeans(points, k, seed, max_iter=300):
    """Lloyd iterations to an assignment fixpoint (or max_iter).

    Empty clusters are reseeded to the point farthest from its assigned
    center. Returns (assignments, centroids).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"points must be 2-D, got shape {points.shape}")
    n = points.shape[0]
    if k < 1 or n < k:
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")

    centers = farthest_point_seeds(points, k, seed)
    assign = np.full(n, -1, dtype=int)
    for _ in range(max_iter):
        d = _pairwise_sq_dist(points, centers)
        new_assign = np.argmin(d, axis=1)
        for c in range(k):
            if not np.any(new_assign == c):
                far = int(np.argmax(d[np.arange(n), new_assign]))
                centers[c] = points[far]
                new_assign[far] = c
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = points[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return assign, centers


def kmeans_inertia(points, assign, centers):
    points = np.asarray(points, dtype=np.float64)
    return float(((points - centers[assign]) ** 2).sum())


def elbow_k(points, k_min, k_max, seed):
    """Pick k in [k_min, k_max] at the largest curvature of the inertia curve."""
    points = np.asarray(points, dtype=np.float64)
    k_max = min(k_max, points.shape[0])
    k_min = min(k_min, k_max)
    ks = list(range(k_min, k_max + 1))
    if len(ks) <= 2:
        return k_min
    inertias = []
    for k in ks:
        assign, centers = kmeans(points, k, seed)
        inertias.append(kmeans_inertia(points, assign, centers))
    curv = [inertias[i - 1] - 2 * inertias[i] + inertias[i + 1] for i in range(1, len(ks) - 1)]
    return ks[1 + int(np.argmax(curv))]


def normalized_laplacian(adjacency):
    w = np.asarray(adjacency, dtype=np.float64)
    w = (w + w.T) / 2.0
    deg = w.sum(axis=1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1e-300)), 0.0)
    lap = np.eye(w.shape[0]) - inv_sqrt[:, None] * w * inv_sqrt[None, :]
    return lap


def eigengap_group_count(eigenvalues, max_groups=8):
    m = min(max_groups, len(eigenvalues))
    if m < 2:
        return 1
    gaps = np.diff(eigenvalues[:m])
    return int(np.argmax(gaps)) + 1


def spectral_clusters(adjacency, n_groups=None, seed=0):
    """Communities from the adjacency: embed into the eigenvectors of the
    n_groups smallest Laplacian eigenvalues, then k-means on the rows.
    n_groups=None picks the largest eigengap among the first min(8, n)."""
    w = np.asarray(adjacency, dtype=np.float64)
    n = w.shape[0]
    if n == 0:
        return np.zeros(0, dtype=int)
    if n == 1:
        return np.zeros(1, dtype=int)
    lap = normalized_laplacian(w)
    eigenvalues, eigenvectors = np.linalg.eigh(lap)
    if n_groups is None:
        n_groups = eigengap_group_count(eigenvalues)
    n_groups = max(1, min(n_groups, n))
    embedding = eigenvectors[:, :n_groups]
    assign, _ = kmeans(embedding, n_groups, seed)
    return assign
