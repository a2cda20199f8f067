"""Agglomerative clustering with Ward linkage via Lance-Williams updates."""

from __future__ import annotations

import numpy as np

from .base import (ClusterAssignment, ClusterParams, as_array, check_k,
                   cluster_means, relabel_by_first_appearance, sq_distances,
                   within_ss)


def ward_merges(X) -> np.ndarray:
    """Full Ward merge sequence.

    Returns an (N-1, 4) array of ``(i, j, height, size)`` rows where ``i < j``
    are the representative (smallest original) indices of the merged
    clusters and ``height`` is the Ward distance
    ``sqrt(2 * n_i * n_j / (n_i + n_j)) * ||c_i - c_j||``. The closest pair is
    taken over the whole upper triangle; ties go to the smallest ``(i, j)``.
    """
    X = as_array(X)
    n = X.shape[0]
    merges = np.zeros((max(n - 1, 0), 4))
    if n < 2:
        return merges
    # Squared Ward distances; only the upper triangle (row < col) is used.
    D = sq_distances(X, X)
    D[np.tril_indices(n)] = np.inf
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    row_min = D.min(axis=1)
    row_arg = D.argmin(axis=1)

    for step in range(n - 1):
        i = int(row_min.argmin())
        j = int(row_arg[i])
        h2 = D[i, j]
        ni, nj = size[i], size[j]
        merges[step] = (i, j, np.sqrt(max(h2, 0.0)), ni + nj)

        # Lance-Williams update for Ward, cluster i absorbs j
        others = np.flatnonzero(active)
        others = others[(others != i) & (others != j)]
        nk = size[others]
        d_ik = np.where(others < i, D[others, i], D[i, others])
        d_jk = np.where(others < j, D[others, j], D[j, others])
        new = ((ni + nk) * d_ik + (nj + nk) * d_jk - nk * h2) / (ni + nj + nk)
        lo = others < i
        D[others[lo], i] = new[lo]
        D[i, others[~lo]] = new[~lo]

        active[j] = False
        size[i] = ni + nj
        D[j, :] = np.inf
        D[:, j] = np.inf
        row_min[j] = np.inf

        # rows whose cached minimum may now be stale
        stale = others[lo & ((row_arg[others] == i) | (row_arg[others] == j))]
        for r in np.concatenate(([i], stale)):
            row_min[r] = D[r].min()
            row_arg[r] = D[r].argmin()
        # rows r < i whose new distance to i undercuts their cached minimum
        for r, v in zip(others[lo], new[lo]):
            if row_arg[r] in (i, j):
                continue
            if v < row_min[r] or (v == row_min[r] and i < row_arg[r]):
                row_min[r] = v
                row_arg[r] = i
        # rows between i and j that pointed at j
        mid = others[(others > i) & (others < j) & (row_arg[others] == j)]
        for r in mid:
            row_min[r] = D[r].min()
            row_arg[r] = D[r].argmin()
        if step == n - 2:
            break
    return merges


def cut_tree(merges: np.ndarray, n: int, k: int) -> np.ndarray:
    """Flat labels after applying the first ``n - k`` merges."""
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j, _, _ in merges[: n - k]:
        ri, rj = find(int(i)), find(int(j))
        parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(a) for a in range(n)])
    return relabel_by_first_appearance(roots)


def ahc_ward(X, p: ClusterParams) -> ClusterAssignment:
    X = as_array(X)
    n = X.shape[0]
    check_k(n, p.k)
    merges = ward_merges(X)
    labels = cut_tree(merges, n, p.k)
    return ClusterAssignment(
        algorithm=p.algorithm, k=p.k, seed=p.seed,
        hard_labels=labels, centroids=cluster_means(X, labels, p.k),
        objective=within_ss(X, labels, p.k), iterations_run=n - p.k,
        extras={"merge_heights": merges[:, 2].tolist()},
    )
