"""Lloyd's k-means with random or k-means++ seeding and restarts."""

from __future__ import annotations

import numpy as np

from .base import (ClusterAssignment, ClusterParams, as_array, check_k,
                   cluster_means, sq_distances)


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def random_init(X: np.ndarray, k: int, rng) -> np.ndarray:
    idx = _rng(rng).choice(X.shape[0], size=k, replace=False)
    return X[idx].copy()


def kmeans_pp_init(X, k: int, seed=0) -> np.ndarray:
    """k-means++ seeding: each new centre is drawn with probability
    proportional to its squared distance to the nearest chosen centre."""
    X = as_array(X)
    n = X.shape[0]
    check_k(n, k)
    rng = _rng(seed)
    chosen = [int(rng.integers(n))]
    closest = sq_distances(X, X[chosen[0]][None, :])[:, 0]
    closest[chosen[0]] = 0.0
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            # every remaining point coincides with a chosen centre
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d = sq_distances(X, X[nxt][None, :])[:, 0]
        d[nxt] = 0.0
        np.minimum(closest, d, out=closest)
    return X[chosen].copy()


def _assign(X: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = sq_distances(X, centers)
    labels = d2.argmin(axis=1)
    return labels, d2


def _repair_empty(labels: np.ndarray, d2: np.ndarray, k: int) -> np.ndarray:
    """Give each empty cluster the point lying farthest from its own centre."""
    counts = np.bincount(labels, minlength=k)
    if counts.min() > 0:
        return labels
    labels = labels.copy()
    own = d2[np.arange(len(labels)), labels].copy()
    for j in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        cand = np.where(movable, own, -np.inf)
        i = int(cand.argmax())
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] += 1
        own[i] = -np.inf
    return labels


def lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int, tol: float):
    """Run Lloyd iterations from ``centers``.

    ``tol`` is absolute: iteration stops once the summed squared centre shift
    falls to ``tol`` or below. Returns labels, centres, inertia, iterations and
    the per-iteration inertia history.
    """
    k = centers.shape[0]
    history: list[float] = []
    labels = None
    converged_labels = False
    it = 0
    for it in range(1, max_iter + 1):
        new_labels, d2 = _assign(X, centers)
        new_labels = _repair_empty(new_labels, d2, k)
        if labels is not None and np.array_equal(new_labels, labels):
            converged_labels = True
            break
        labels = new_labels
        new_centers = cluster_means(X, labels, k)
        diff = X - new_centers[labels]
        history.append(float((diff * diff).sum()))
        shift = float(((new_centers - centers) ** 2).sum())
        centers = new_centers
        if shift <= tol:
            break
    if not converged_labels:
        labels, d2 = _assign(X, centers)
        labels = _repair_empty(labels, d2, k)
    diff = X - centers[labels]
    inertia = float((diff * diff).sum())
    if not history or inertia < history[-1]:
        history.append(inertia)
    return labels, centers, inertia, it, history


def kmeans(X, p: ClusterParams) -> ClusterAssignment:
    X = as_array(X)
    n = X.shape[0]
    check_k(n, p.k)
    opts = p.kmeans
    # tolerance is relative to the mean per-feature variance of the data
    tol = opts.tol * float(np.mean(np.var(X, axis=0))) if n > 1 else 0.0
    rng = np.random.default_rng(p.seed)
    best = None
    for _ in range(opts.n_init):
        if opts.init == "plusplus":
            init = kmeans_pp_init(X, p.k, rng)
        else:
            init = random_init(X, p.k, rng)
        run = lloyd(X, init, opts.max_iter, tol)
        if best is None or run[2] < best[2]:
            best = run
    labels, centers, inertia, iters, history = best
    return ClusterAssignment(
        algorithm=p.algorithm, k=p.k, seed=p.seed,
        hard_labels=labels.astype(np.int64), centroids=centers,
        objective=inertia, iterations_run=iters, history=history,
    )
