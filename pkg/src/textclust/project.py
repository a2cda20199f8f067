"""2-D views of embeddings: PCA followed by exact t-SNE, plus CSV/SVG export."""

from __future__ import annotations

import csv
import html
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cluster.base import as_array, sq_distances

TSNE_MAX_POINTS = 5000

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    seed: int = 0
    exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_switch: int = 250
    entropy_tol: float = 1e-6


@dataclass(frozen=True)
class ProjectionConfig:
    pca_dims: int = 50
    tsne: TsneConfig = field(default_factory=TsneConfig)


@dataclass
class Projection2D:
    coords: np.ndarray
    row_ids: list[str]
    explained_variance: np.ndarray
    betas: np.ndarray | None = None
    kl_history: list[tuple[int, float]] = field(default_factory=list)


def _ids_and_matrix(X) -> tuple[list[str], np.ndarray]:
    ids = list(getattr(X, "row_ids", [])) or [str(i) for i in range(len(X))]
    return ids, as_array(X)


def pca(X, dims: int):
    """Project onto the top ``dims`` principal axes.

    Returns ``(scores, explained_variance_ratio, components)``. Each
    component's sign is fixed so that its largest-magnitude loading is
    positive.
    """
    _, A = _ids_and_matrix(X)
    n, d = A.shape
    if dims < 1 or dims > min(n, d):
        raise ProjectionError(f"pca dims must be in [1, {min(n, d)}], got {dims}")
    centered = A - A.mean(axis=0)
    U, S, Vt = np.linalg.svd(centered, full_matrices=False)
    tol = S.max(initial=0.0) * max(n, d) * np.finfo(float).eps
    rank = int((S > tol).sum())
    if dims > rank:
        raise ProjectionError(f"pca dims {dims} exceeds data rank; achievable rank is {rank}")
    comps = Vt[:dims].copy()
    for j in range(dims):
        if comps[j, np.abs(comps[j]).argmax()] < 0:
            comps[j] = -comps[j]
    var = S ** 2
    ratio = var[:dims] / var.sum() if var.sum() > 0 else np.zeros(dims)
    return centered @ comps.T, ratio, comps


def _numerical_rank(A: np.ndarray) -> int:
    S = np.linalg.svd(A - A.mean(axis=0), compute_uv=False)
    if S.size == 0 or S.max() == 0:
        return 0
    tol = S.max() * max(A.shape) * np.finfo(float).eps
    return int((S > tol).sum())


def conditional_p(d2: np.ndarray, perplexity: float, tol: float = 1e-6,
                  max_steps: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Row-conditional affinities with per-row precision found by bisection.

    ``d2`` holds squared distances (diagonal ignored). Each row's precision
    ``beta = 1 / (2 sigma^2)`` is searched until the row entropy (nats) is
    within ``tol`` of ``log(perplexity)``.
    """
    n = d2.shape[0]
    target = math.log(perplexity)
    P = np.zeros((n, n))
    betas = np.ones(n)
    for i in range(n):
        di = np.delete(d2[i], i)
        di = di - di.min()
        lo, hi = 0.0, np.inf
        beta = 1.0
        for _ in range(max_steps):
            w = np.exp(-di * beta)
            sw = w.sum()
            pr = w / sw
            h = math.log(sw) + beta * float((di * pr).sum())
            diff = h - target
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        betas[i] = beta
        P[i, np.arange(n) != i] = pr
    return P, betas


def _kl(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0
    return float((P[mask] * np.log(P[mask] / Q[mask])).sum())


def tsne_embed(A: np.ndarray, cfg: TsneConfig = TsneConfig(), kl_every: int = 50):
    """Exact t-SNE of the rows of ``A`` into two dimensions.

    Returns ``(Y, betas, kl_history)``; the history holds ``(iteration, KL)``
    pairs computed without exaggeration.
    """
    n = A.shape[0]
    if n < 4:
        raise ProjectionError(f"t-SNE needs at least 4 points, got {n}")
    if not 0 < cfg.perplexity < (n - 1) / 3:
        raise ProjectionError(
            f"perplexity {cfg.perplexity} infeasible for N={n}; must be below {(n - 1) / 3:.3f}")
    d2 = sq_distances(A, A)
    cond, betas = conditional_p(d2, cfg.perplexity, cfg.entropy_tol)
    P = (cond + cond.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)
    np.fill_diagonal(P, 0.0)

    rng = np.random.default_rng(cfg.seed)
    Y = 1e-4 * rng.standard_normal((n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    history: list[tuple[int, float]] = []
    for it in range(cfg.iterations):
        exag = cfg.exaggeration if it < cfg.exaggeration_iters else 1.0
        momentum = 0.5 if it < cfg.momentum_switch else 0.8
        sum_y = (Y * Y).sum(axis=1)
        num = 1.0 / (1.0 + sum_y[:, None] - 2.0 * Y @ Y.T + sum_y[None, :])
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-12)
        PQ = (exag * P - Q) * num
        grad = 4.0 * (np.diag(PQ.sum(axis=1)) - PQ) @ Y
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - cfg.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
        if (it + 1) % kl_every == 0:
            history.append((it + 1, _kl(P, Q)))
    return Y, betas, history


def tsne(X, cfg: ProjectionConfig = ProjectionConfig()) -> Projection2D:
    """PCA down to ``cfg.pca_dims`` (capped by the data rank), then t-SNE."""
    ids, A = _ids_and_matrix(X)
    n, d = A.shape
    if n > TSNE_MAX_POINTS:
        raise ProjectionError(
            f"exact t-SNE is capped at {TSNE_MAX_POINTS} points (got {n}); "
            "use subsample_per_class first")
    if n < 4:
        raise ProjectionError(f"t-SNE needs at least 4 points, got {n}")
    if not 0 < cfg.tsne.perplexity < (n - 1) / 3:
        raise ProjectionError(
            f"perplexity {cfg.tsne.perplexity} infeasible for N={n}; "
            f"must be below {(n - 1) / 3:.3f}")
    dims = min(cfg.pca_dims, n, d, max(_numerical_rank(A), 1))
    if _numerical_rank(A) == 0:
        reduced, ratio = np.zeros((n, 1)), np.zeros(1)
    else:
        reduced, ratio, _ = pca(A, dims)
    Y, betas, history = tsne_embed(reduced, cfg.tsne)
    return Projection2D(Y, ids, ratio, betas, history)


def subsample_per_class(labels: Sequence, cap: int, seed: int = 0) -> np.ndarray:
    """Sorted row indices keeping at most ``cap`` rows, split across classes
    in proportion to their size (each class keeps at least one row)."""
    labels = np.asarray(labels)
    n = len(labels)
    if n <= cap:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    classes, codes = np.unique(labels, return_inverse=True)
    keep = []
    for c in range(len(classes)):
        idx = np.flatnonzero(codes == c)
        quota = max(1, int(round(cap * len(idx) / n)))
        keep.append(rng.choice(idx, size=min(quota, len(idx)), replace=False))
    return np.sort(np.concatenate(keep))


def export_projection(p: Projection2D, labels: Sequence, path) -> tuple[Path, Path]:
    """Write ``<path>.csv`` (id, x, y, label) and ``<path>.svg``."""
    n = len(p.coords)
    if n == 0:
        raise ProjectionError("nothing to export")
    if len(labels) != n:
        raise ProjectionError(f"{n} points but {len(labels)} labels")
    base = Path(path)
    if base.suffix.lower() in (".csv", ".svg"):
        base = base.with_suffix("")
    csv_path = base.with_suffix(".csv")
    svg_path = base.with_suffix(".svg")
    try:
        base.parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x", "y", "label"])
            for rid, (x, y), lab in zip(p.row_ids, p.coords, labels):
                w.writerow([rid, repr(float(x)), repr(float(y)), lab])
        svg_path.write_text(_scatter_svg(p.coords, [str(l) for l in labels]), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"failed to export projection to {base}: {exc}") from exc
    return csv_path, svg_path


def read_projection_csv(path) -> tuple[list[str], np.ndarray, list[str]]:
    ids, coords, labels = [], [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            ids.append(row["id"])
            coords.append((float(row["x"]), float(row["y"])))
            labels.append(row["label"])
    return ids, np.array(coords), labels


def _scatter_svg(coords: np.ndarray, labels: list[str], size: int = 600, pad: int = 30) -> str:
    classes = sorted(set(labels))
    color = {c: PALETTE[i % len(PALETTE)] for i, c in enumerate(classes)}
    lo = coords.min(axis=0)
    span = coords.max(axis=0) - lo
    span[span == 0] = 1.0
    scale = (size - 2 * pad) / span
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 20 * len(classes)}">',
           f'<rect width="100%" height="100%" fill="white"/>']
    for cls in classes:
        out.append(f'<g class="label" data-label="{html.escape(cls)}" fill="{color[cls]}">')
        for (x, y), lab in zip(coords, labels):
            if lab == cls:
                px = pad + (x - lo[0]) * scale[0]
                py = size - pad - (y - lo[1]) * scale[1]
                out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3"/>')
        out.append("</g>")
    for i, cls in enumerate(classes):
        y = size + 15 + 20 * i - 10
        out.append(f'<circle cx="{pad}" cy="{y}" r="5" fill="{color[cls]}"/>')
        out.append(f'<text x="{pad + 10}" y="{y + 4}" font-size="12">{html.escape(cls)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
