"""Direct-from-definition reference metrics.

Plain Python loops over points and pairs; nothing here is shared with the
package's vectorised implementations.
"""

from __future__ import annotations

import math
from itertools import combinations


def f1_weighted(true, pred):
    n = len(true)
    total = 0.0
    for c in sorted(set(true)):
        tp = sum(1 for t, p in zip(true, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(true, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(true, pred) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        total += (tp + fn) / n * f1
    return total


def adjusted_rand(true, pred):
    """Pair-counting form: index is the number of pairs grouped together in
    both partitions, corrected by its expectation under fixed marginals."""
    pairs = list(combinations(range(len(true)), 2))
    both = sum(1 for i, j in pairs if true[i] == true[j] and pred[i] == pred[j])
    same_t = sum(1 for i, j in pairs if true[i] == true[j])
    same_p = sum(1 for i, j in pairs if pred[i] == pred[j])
    expected = same_t * same_p / len(pairs)
    maximum = (same_t + same_p) / 2
    if maximum == expected:
        return 1.0
    return (both - expected) / (maximum - expected)


def _entropy(labels):
    n = len(labels)
    h = 0.0
    for c in set(labels):
        p = labels.count(c) / n
        h -= p * math.log(p)
    return h


def homogeneity(true, pred):
    true, pred = list(true), list(pred)
    h_c = _entropy(true)
    if h_c == 0:
        return 1.0
    n = len(true)
    h_ck = 0.0
    for k in set(pred):
        members = [t for t, p in zip(true, pred) if p == k]
        h_ck += len(members) / n * _entropy(members)
    return 1 - h_ck / h_c


def silhouette(X, labels):
    n = len(X)
    scores = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = sum(math.dist(X[i], X[j]) for j in own) / len(own)
        b = math.inf
        for c in set(labels):
            if c == labels[i]:
                continue
            other = [j for j in range(n) if labels[j] == c]
            b = min(b, sum(math.dist(X[i], X[j]) for j in other) / len(other))
        scores.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return sum(scores) / n


def calinski_harabasz(X, labels):
    n, d = len(X), len(X[0])
    clusters = sorted(set(labels))
    k = len(clusters)
    mean = [sum(x[t] for x in X) / n for t in range(d)]
    tr_b = tr_w = 0.0
    for c in clusters:
        pts = [x for x, l in zip(X, labels) if l == c]
        cen = [sum(p[t] for p in pts) / len(pts) for t in range(d)]
        tr_b += len(pts) * sum((cen[t] - mean[t]) ** 2 for t in range(d))
        tr_w += sum(sum((p[t] - cen[t]) ** 2 for t in range(d)) for p in pts)
    return tr_b / tr_w * (n - k) / (k - 1)


def ward_cut_bruteforce(X, k):
    """Greedy agglomeration recomputing the Ward cost (increase in total
    within-cluster sum of squares) from raw points for every candidate pair."""
    clusters = [[i] for i in range(len(X))]

    def sse(members):
        d = len(X[0])
        cen = [sum(X[i][t] for i in members) / len(members) for t in range(d)]
        return sum(sum((X[i][t] - cen[t]) ** 2 for t in range(d)) for i in members)

    heights = []
    while len(clusters) > 1:
        best = None
        for a, b in combinations(range(len(clusters)), 2):
            cost = sse(clusters[a] + clusters[b]) - sse(clusters[a]) - sse(clusters[b])
            if best is None or cost < best[0]:
                best = (cost, a, b)
        cost, a, b = best
        heights.append(math.sqrt(2 * cost))
        merged = clusters[a] + clusters[b]
        clusters = [c for i, c in enumerate(clusters) if i not in (a, b)] + [merged]
        if len(clusters) == k:
            cut = [sorted(c) for c in clusters]
        if k == len(X):
            cut = [[i] for i in range(len(X))]
    partition = frozenset(frozenset(c) for c in cut)
    return partition, heights


def optimal_two_partition_inertia(X):
    """Minimum within-cluster sum of squares over every split into two
    non-empty groups."""
    n = len(X)
    d = len(X[0])
    best = math.inf
    for mask in range(1, 2 ** (n - 1)):
        groups = ([i for i in range(n) if mask >> i & 1], [i for i in range(n) if not mask >> i & 1])
        total = 0.0
        for g in groups:
            cen = [sum(X[i][t] for i in g) / len(g) for t in range(d)]
            total += sum(sum((X[i][t] - cen[t]) ** 2 for t in range(d)) for i in g)
        best = min(best, total)
    return best


def partition_of(labels):
    groups = {}
    for i, l in enumerate(labels):
        groups.setdefault(int(l), []).append(i)
    return frozenset(frozenset(g) for g in groups.values())
