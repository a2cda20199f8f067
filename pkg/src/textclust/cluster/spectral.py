"""Spectral clustering: RBF affinity, symmetric normalised Laplacian,
discretisation of the spectral embedding into a partition."""

from __future__ import annotations

import numpy as np

from .base import (ClusterAssignment, ClusterParams, ClusteringError, as_array,
                   check_k, cluster_means, sq_distances)


def rbf_affinity(X, gamma: float = 1.0) -> np.ndarray:
    X = as_array(X)
    A = np.exp(-gamma * sq_distances(X, X))
    A = 0.5 * (A + A.T)
    np.fill_diagonal(A, 1.0)
    return A


def normalized_laplacian(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``I - D^-1/2 A D^-1/2`` and the vector of ``sqrt(degree)``."""
    deg = A.sum(axis=1)
    sq = np.sqrt(deg)
    L = -A / sq[:, None] / sq[None, :]
    L[np.diag_indices_from(L)] += 1.0
    L = 0.5 * (L + L.T)
    return L, sq


def spectral_embedding(A: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and degree-rescaled eigenvectors of the k smallest
    eigenvalues of the normalised Laplacian, with a fixed sign convention."""
    L, sq = normalized_laplacian(A)
    vals, vecs = np.linalg.eigh(L)
    vals, vecs = vals[:k], vecs[:, :k]
    emb = vecs / sq[:, None]
    for j in range(k):
        col = emb[:, j]
        pivot = int(np.abs(col).argmax())
        if col[pivot] < 0:
            emb[:, j] = -col
    return vals, emb


def discretize(vectors: np.ndarray, rng: np.random.Generator, max_restarts: int = 30,
               max_iter: int = 20) -> tuple[np.ndarray, float]:
    """Round a continuous spectral embedding to a partition (Yu & Shi).

    Alternates between picking the discrete partition closest to the rotated
    embedding and the orthogonal rotation (from an SVD) closest to that
    partition. The random generator selects the first row of the initial
    rotation. Returns labels and the final normalised-cut style objective.
    """
    eps = np.finfo(float).eps
    n, k = vectors.shape
    V = vectors.astype(np.float64, copy=True)
    V = V / np.linalg.norm(V, axis=0) * np.sqrt(n)
    for j in range(k):
        if V[0, j] != 0:
            V[:, j] *= -np.sign(V[0, j])
    norms = np.linalg.norm(V, axis=1)
    norms[norms == 0] = 1.0
    V = V / norms[:, None]

    labels = None
    ncut = np.inf
    for _ in range(max_restarts):
        R = np.zeros((k, k))
        R[:, 0] = V[rng.integers(n)]
        c = np.zeros(n)
        for j in range(1, k):
            c += np.abs(V @ R[:, j - 1])
            R[:, j] = V[c.argmin()]
        last = 0.0
        try:
            for _ in range(max_iter):
                labels = (V @ R).argmax(axis=1)
                onehot = np.zeros((n, k))
                onehot[np.arange(n), labels] = 1.0
                U, S, Vh = np.linalg.svd(onehot.T @ V)
                ncut = 2.0 * (n - S.sum())
                if abs(ncut - last) < eps:
                    break
                last = ncut
                R = Vh.T @ U.T
        except np.linalg.LinAlgError:
            continue
        return labels, float(ncut)
    if labels is None:
        raise ClusteringError("spectral discretisation did not converge")
    return labels, float(ncut)


def spectral(X, p: ClusterParams) -> ClusterAssignment:
    X = as_array(X)
    n = X.shape[0]
    check_k(n, p.k)
    cap = p.spectral.max_dense
    if n > cap:
        raise ClusteringError(
            f"spectral clustering uses a dense eigensolver capped at {cap} points "
            f"(got {n}); subsample the corpus or raise spectral.max_dense")
    A = rbf_affinity(X, p.spectral.gamma)
    vals, emb = spectral_embedding(A, p.k)
    labels, ncut = discretize(emb, np.random.default_rng(p.seed))
    labels = labels.astype(np.int64)
    return ClusterAssignment(
        algorithm=p.algorithm, k=p.k, seed=p.seed, hard_labels=labels,
        centroids=cluster_means(X, labels, p.k), objective=ncut,
        iterations_run=1, extras={"eigenvalues": vals.tolist()},
    )
