"""Cluster-to-class mapping and the five evaluation metrics.

External metrics (F1S, ARI, HS) compare against ground truth; internal ones
(SS, CHI) look only at the vectors and the predicted partition.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cluster.base import as_array, sq_distances

log = logging.getLogger(__name__)

METRICS = ("f1s", "ari", "hs", "ss", "chi")


class MetricError(ValueError):
    pass


@dataclass
class LabelMapping:
    cluster_to_class: np.ndarray
    distances: np.ndarray
    classes: list
    skipped: list[int]

    def apply(self, pred_labels) -> np.ndarray:
        return self.cluster_to_class[np.asarray(pred_labels)]


@dataclass
class MetricReport:
    f1s: float
    ari: float
    hs: float
    ss: float
    chi: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def values(self) -> list[float]:
        return [getattr(self, m) for m in METRICS]


def _encode(labels) -> tuple[np.ndarray, list]:
    arr = np.asarray(labels)
    classes, codes = np.unique(arr, return_inverse=True)
    return codes.reshape(-1), classes.tolist()


def _check_lengths(a, b) -> None:
    if len(a) != len(b):
        raise MetricError(f"label length mismatch: {len(a)} vs {len(b)}")


def contingency(true_labels, pred_labels) -> np.ndarray:
    _check_lengths(true_labels, pred_labels)
    t, _ = _encode(true_labels)
    p, _ = _encode(pred_labels)
    table = np.zeros((t.max() + 1 if len(t) else 0, p.max() + 1 if len(p) else 0),
                     dtype=np.int64)
    np.add.at(table, (t, p), 1)
    return table


# --- mapping ---------------------------------------------------------------

def map_clusters(X, pred_labels, true_labels, k: int | None = None,
                 one_to_one: bool = False) -> LabelMapping:
    """Map each derived cluster to the class with the nearest centroid.

    Clusters are mapped independently, so two clusters may share a class.
    With ``one_to_one`` a minimum-total-distance assignment is used instead.
    Empty clusters are skipped and map to -1.
    """
    X = as_array(X)
    pred = np.asarray(pred_labels, dtype=np.int64)
    _check_lengths(pred, true_labels)
    if len(pred) != X.shape[0]:
        raise MetricError(f"{X.shape[0]} vectors but {len(pred)} labels")
    truth, classes = _encode(true_labels)
    if k is None:
        k = int(pred.max()) + 1
    n_cls = len(classes)

    def centroids(codes, size):
        sums = np.zeros((size, X.shape[1]))
        np.add.at(sums, codes, X)
        counts = np.bincount(codes, minlength=size)
        return sums, counts

    csum, ccount = centroids(pred, k)
    tsum, tcount = centroids(truth, n_cls)
    class_cent = tsum / tcount[:, None]
    skipped = [int(j) for j in np.flatnonzero(ccount == 0)]
    for j in skipped:
        log.warning("derived cluster %d is empty; nothing to relabel", j)
    with np.errstate(invalid="ignore", divide="ignore"):
        clus_cent = csum / ccount[:, None]
    dist = np.sqrt(sq_distances(np.nan_to_num(clus_cent), class_cent))
    dist[skipped] = np.nan

    mapping = np.full(k, -1, dtype=np.int64)
    live = np.array([j for j in range(k) if j not in skipped], dtype=np.int64)
    if one_to_one:
        rows, cols = linear_sum_assignment(dist[live])
        mapping[live[rows]] = cols
        # clusters left over when k exceeds the class count fall back to nearest
        rest = [j for j in live if mapping[j] < 0]
        for j in rest:
            mapping[j] = int(dist[j].argmin())
    else:
        for j in live:
            mapping[j] = int(dist[j].argmin())
    return LabelMapping(mapping, dist, classes, skipped)


# --- external metrics ------------------------------------------------------

def f1_weighted(true_labels, mapped_labels) -> float:
    """Support-weighted mean of per-class F1 over the true classes."""
    _check_lengths(true_labels, mapped_labels)
    t = np.asarray(true_labels)
    p = np.asarray(mapped_labels)
    n = len(t)
    if n == 0:
        raise MetricError("empty label arrays")
    total = 0.0
    for cls in np.unique(t):
        tp = float(np.sum((t == cls) & (p == cls)))
        support = float(np.sum(t == cls))
        predicted = float(np.sum(p == cls))
        denom = support + predicted
        f1 = 2.0 * tp / denom if tp > 0 else 0.0
        total += support / n * f1
    return total


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def adjusted_rand_index(true_labels, pred_labels) -> float:
    _check_lengths(true_labels, pred_labels)
    n = len(true_labels)
    if n < 2:
        raise MetricError("ARI needs at least 2 points")
    table = contingency(true_labels, pred_labels)
    sum_cells = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions trivial (all singletons or one block): identical
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def _entropy(counts: np.ndarray) -> float:
    counts = counts[counts > 0].astype(np.float64)
    total = counts.sum()
    pr = counts / total
    return float(-(pr * np.log(pr)).sum())


def homogeneity(true_labels, pred_labels) -> float:
    table = contingency(true_labels, pred_labels)
    n = table.sum()
    if n == 0:
        raise MetricError("empty label arrays")
    h_c = _entropy(table.sum(axis=1))
    if h_c == 0.0:
        return 1.0
    h_ck = 0.0
    for col in table.T:
        nk = col.sum()
        if nk:
            h_ck += nk / n * _entropy(col)
    return float(1.0 - h_ck / h_c)


# --- internal metrics ------------------------------------------------------

def _codes_for_internal(X: np.ndarray, pred_labels) -> tuple[np.ndarray, int]:
    if X.shape[0] != len(pred_labels):
        raise MetricError(f"{X.shape[0]} vectors but {len(pred_labels)} labels")
    codes, classes = _encode(pred_labels)
    return codes, len(classes)


def silhouette(X, pred_labels, chunk: int = 1024) -> float:
    """Mean silhouette over all points with Euclidean distances.

    Rows are processed in fixed-size chunks; per-cluster distance sums come
    from a product with the one-hot label matrix, so memory stays at
    ``chunk x N``.
    """
    X = as_array(X)
    codes, k = _codes_for_internal(X, pred_labels)
    n = X.shape[0]
    if not 2 <= k < n:
        raise MetricError(f"silhouette undefined for k={k}, N={n}")
    onehot = np.zeros((n, k))
    onehot[np.arange(n), codes] = 1.0
    sizes = onehot.sum(axis=0)
    s = np.zeros(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d = np.sqrt(sq_distances(X[start:stop], X))
        # self-distances should be exactly zero
        d[np.arange(stop - start), np.arange(start, stop)] = 0.0
        sums = d @ onehot
        own = codes[start:stop]
        rows = np.arange(stop - start)
        own_size = sizes[own]
        with np.errstate(invalid="ignore", divide="ignore"):
            a = sums[rows, own] / (own_size - 1)
            means = sums / sizes[None, :]
        means[rows, own] = np.inf
        b = means.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            si = np.where(denom > 0, (b - a) / denom, 0.0)
        si[own_size == 1] = 0.0
        s[start:stop] = si
    return float(s.mean())


def calinski_harabasz(X, pred_labels) -> float:
    X = as_array(X)
    codes, k = _codes_for_internal(X, pred_labels)
    n = X.shape[0]
    if not 2 <= k < n:
        raise MetricError(f"Calinski-Harabasz undefined for k={k}, N={n}")
    mean = X.mean(axis=0)
    tr_b = 0.0
    tr_w = 0.0
    for j in range(k):
        members = X[codes == j]
        c = members.mean(axis=0)
        tr_b += len(members) * float(((c - mean) ** 2).sum())
        tr_w += float(((members - c) ** 2).sum())
    if tr_w == 0.0:
        log.warning("within-cluster dispersion is zero; CHI reported as +inf")
        return math.inf
    return tr_b / tr_w * (n - k) / (k - 1)


# --- one benchmark cell ----------------------------------------------------

def score_cell(X, predicted, true_labels, one_to_one: bool = False) -> MetricReport:
    """All five metrics for one clustering of ``X``.

    ``predicted`` is a ClusterAssignment or a plain label array. F1S is
    computed on cluster labels mapped to classes; the rest use raw labels.
    """
    labels = np.asarray(getattr(predicted, "hard_labels", predicted), dtype=np.int64)
    k = getattr(predicted, "k", None)
    truth = np.asarray(true_labels)
    mapping = map_clusters(X, labels, truth, k=k, one_to_one=one_to_one)
    classes = np.asarray(mapping.classes, dtype=object)
    mapped = classes[mapping.apply(labels)]
    truth_obj = truth.astype(object)
    n_pred = len(np.unique(labels))
    n = len(labels)
    if 2 <= n_pred < n:
        ss = silhouette(X, labels)
        chi = calinski_harabasz(X, labels)
    else:
        log.warning("internal metrics undefined with %d clusters over %d points", n_pred, n)
        ss, chi = float("nan"), float("nan")
    return MetricReport(
        f1s=f1_weighted(truth_obj, mapped),
        ari=adjusted_rand_index(truth, labels),
        hs=homogeneity(truth, labels),
        ss=ss,
        chi=chi,
    )
