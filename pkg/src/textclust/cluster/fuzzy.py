"""Fuzzy c-means (Bezdek) with alternating centroid / membership updates."""

from __future__ import annotations

import numpy as np

from .base import ClusterAssignment, ClusterParams, as_array, check_k, sq_distances


def memberships(X, centroids: np.ndarray, m: float) -> np.ndarray:
    """Membership matrix (N x k) for points ``X`` given fixed centroids.

    A point sitting exactly on one or more centroids splits its membership
    equally among them and gets zero elsewhere.
    """
    X = as_array(X)
    d = np.sqrt(sq_distances(X, np.asarray(centroids, dtype=np.float64)))
    return _memberships_from_dist(d, m)


def _memberships_from_dist(d: np.ndarray, m: float) -> np.ndarray:
    power = 2.0 / (m - 1.0)
    u = np.empty_like(d)
    zero = d == 0.0
    hit = zero.any(axis=1)
    if hit.any():
        z = zero[hit].astype(np.float64)
        u[hit] = z / z.sum(axis=1, keepdims=True)
    rest = ~hit
    if rest.any():
        dr = d[rest]
        # scale by the row minimum so the largest ratio term is exactly 1
        ratio = dr.min(axis=1, keepdims=True) / dr
        w = ratio ** power
        u[rest] = w / w.sum(axis=1, keepdims=True)
    return u


def fcm_objective(X: np.ndarray, u: np.ndarray, centroids: np.ndarray, m: float) -> float:
    return float(((u ** m) * sq_distances(X, centroids)).sum())


def fuzzy_cmeans(X, p: ClusterParams, init: np.ndarray | None = None,
                 callback=None) -> ClusterAssignment:
    """Cluster ``X`` with fuzzy c-means.

    ``init`` is an optional N x k starting membership matrix; when omitted the
    rows are drawn uniformly at random from the seeded generator and
    normalised. ``callback(iteration, u, centroids, objective)`` is invoked
    after every membership update.
    """
    X = as_array(X)
    n = X.shape[0]
    k = p.k
    check_k(n, k)
    m, error, maxiter = p.fuzzy.m, p.fuzzy.error, p.fuzzy.maxiter
    if init is None:
        u = np.random.default_rng(p.seed).random((n, k))
    else:
        u = np.array(init, dtype=np.float64)
        if u.shape != (n, k):
            raise ValueError(f"init membership must be {(n, k)}, got {u.shape}")
    u = u / u.sum(axis=1, keepdims=True)

    history: list[float] = []
    centroids = None
    it = 0
    for it in range(1, maxiter + 1):
        um = u ** m
        centroids = (um.T @ X) / um.sum(axis=0)[:, None]
        d = np.sqrt(sq_distances(X, centroids))
        u_new = _memberships_from_dist(d, m)
        obj = float(((u_new ** m) * d * d).sum())
        history.append(obj)
        if callback is not None:
            callback(it, u_new, centroids, obj)
        delta = float(np.abs(u_new - u).max())
        u = u_new
        if delta < error:
            break
    return ClusterAssignment(
        algorithm=p.algorithm, k=k, seed=p.seed,
        hard_labels=u.argmax(axis=1).astype(np.int64), centroids=centroids,
        objective=history[-1], iterations_run=it, membership=u, history=history,
        extras={"converged": bool(delta < error)},
    )
