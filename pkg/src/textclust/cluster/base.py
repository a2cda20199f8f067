from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

ALGORITHMS = ("kmeans", "kmeans_pp", "ahc_ward", "fuzzy_cm", "spectral")


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class KMeansOptions:
    init: str = "random"
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-4


@dataclass(frozen=True)
class FuzzyOptions:
    m: float = 2.0
    error: float = 0.005
    maxiter: int = 1000


@dataclass(frozen=True)
class SpectralOptions:
    assign_labels: str = "discretize"
    gamma: float = 1.0
    max_dense: int = 20_000


@dataclass(frozen=True)
class ClusterParams:
    algorithm: str
    k: int
    seed: int = 0
    kmeans: KMeansOptions = field(default_factory=KMeansOptions)
    fuzzy: FuzzyOptions = field(default_factory=FuzzyOptions)
    spectral: SpectralOptions = field(default_factory=SpectralOptions)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ClusteringError(f"unknown algorithm {self.algorithm!r}")
        if self.k < 2:
            raise ClusteringError(f"k must be >= 2, got {self.k}")
        if self.kmeans.init not in ("random", "plusplus"):
            raise ClusteringError(f"unknown kmeans init {self.kmeans.init!r}")
        if self.kmeans.n_init < 1 or self.kmeans.max_iter < 1:
            raise ClusteringError("n_init and max_iter must be >= 1")
        if self.fuzzy.m <= 1 or self.fuzzy.error <= 0 or self.fuzzy.maxiter < 1:
            raise ClusteringError("fuzzy c-means needs m > 1, error > 0, maxiter >= 1")
        if self.spectral.gamma <= 0:
            raise ClusteringError("spectral gamma must be > 0")
        if self.spectral.assign_labels != "discretize":
            raise ClusteringError("only assign_labels='discretize' is supported")

    @classmethod
    def default(cls, algorithm: str, k: int, **overrides) -> "ClusterParams":
        """Parameters used in the benchmark for each algorithm."""
        if algorithm == "kmeans":
            base = dict(seed=0, kmeans=KMeansOptions(init="random", n_init=10))
        elif algorithm == "kmeans_pp":
            base = dict(seed=0, kmeans=KMeansOptions(init="plusplus", n_init=1))
        elif algorithm == "spectral":
            base = dict(seed=10)
        else:
            base = dict(seed=0)
        base.update(overrides)
        return cls(algorithm=algorithm, k=k, **base)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ClusterParams":
        d = dict(d)
        for key, typ in (("kmeans", KMeansOptions), ("fuzzy", FuzzyOptions),
                         ("spectral", SpectralOptions)):
            if isinstance(d.get(key), dict):
                d[key] = typ(**d[key])
        return cls(**d)


@dataclass
class ClusterAssignment:
    algorithm: str
    k: int
    seed: int
    hard_labels: np.ndarray
    centroids: np.ndarray
    objective: float
    iterations_run: int
    membership: np.ndarray | None = None
    history: list[float] = field(default_factory=list)
    extras: dict[str, Any] = field(default_factory=dict)

    def to_json_dict(self) -> dict[str, Any]:
        out = {
            "algorithm": self.algorithm,
            "k": self.k,
            "seed": self.seed,
            "labels": [int(x) for x in self.hard_labels],
            "objective": float(self.objective),
        }
        if self.membership is not None:
            out["membership"] = self.membership.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def as_array(X) -> np.ndarray:
    if hasattr(X, "dense"):
        X = X.dense()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ClusteringError(f"expected a 2-D matrix, got shape {X.shape}")
    return X


def check_k(n: int, k: int) -> None:
    if n < k:
        raise ClusteringError(f"more clusters than points (k={k}, N={n})")


def sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def cluster_means(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Per-cluster means; an empty cluster gets a row of NaN."""
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sums / counts[:, None]


def within_ss(X: np.ndarray, labels: np.ndarray, k: int) -> float:
    C = cluster_means(X, labels, k)
    diff = X - C[labels]
    return float((diff * diff).sum())


def relabel_by_first_appearance(labels: np.ndarray) -> np.ndarray:
    mapping: dict[int, int] = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out
