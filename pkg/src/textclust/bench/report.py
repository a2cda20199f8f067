"""Run reports: best-algorithm selection, dominance totals, CSV/Markdown output."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

from ..cluster.base import ALGORITHMS
from ..evaluate import METRICS, MetricReport

log = logging.getLogger(__name__)

STATUSES = ("ok", "failed", "skipped-cache")
METRIC_HEADERS = ("F1S", "ARI", "HS", "SS", "CHI")
GRID_COLUMNS = ("dataset", "embedding", "version", "algorithm", "status") + METRICS


@dataclass
class CellResult:
    cell_id: str
    dataset: str
    embedding: str
    algorithm: str
    algorithm_key: str
    version: str = "full"
    status: str = "ok"
    metrics: MetricReport | None = None
    wall_time: float = 0.0
    error: str | None = None
    order: int = 0

    @property
    def usable(self) -> bool:
        return (self.status in ("ok", "skipped-cache") and self.metrics is not None
                and math.isfinite(self.metrics.f1s))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["metrics"] = None if self.metrics is None else self.metrics.as_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CellResult":
        d = dict(d)
        if d.get("metrics") is not None:
            d["metrics"] = MetricReport(**d["metrics"])
        known = cls.__dataclass_fields__
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class RunReport:
    name: str
    cells: list[CellResult]
    families: dict[str, str] = field(default_factory=dict)
    summarised: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def best_rows(self) -> dict[tuple[str, str, str], CellResult]:
        return select_best_rows(self.cells)

    @property
    def all_ok(self) -> bool:
        return all(c.status in ("ok", "skipped-cache") for c in self.cells)

    def datasets(self) -> list[str]:
        return list(dict.fromkeys(c.dataset for c in self.cells))

    def embeddings(self) -> list[str]:
        return list(dict.fromkeys(c.embedding for c in self.cells))

    def totals(self, version: str = "full") -> dict[str, dict[str, int] | None]:
        best = self.best_rows
        return {ds: compute_totals(best, ds, version) for ds in self.datasets()}

    def to_dict(self) -> dict[str, Any]:
        best = self.best_rows
        return {
            "name": self.name,
            "summarised": self.summarised,
            "families": self.families,
            "notes": self.notes,
            "cells": [c.to_dict() for c in self.cells],
            "best_rows": [
                {"dataset": ds, "embedding": emb, "version": ver, "cell_id": c.cell_id,
                 "algorithm": c.algorithm}
                for (ds, emb, ver), c in best.items()
            ],
            "totals": {ds: t for ds, t in self.totals().items()},
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "RunReport":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(name=d["name"], cells=[CellResult.from_dict(c) for c in d["cells"]],
                   families=d.get("families", {}), summarised=d.get("summarised", False),
                   notes=d.get("notes", []))


def _rank(cell: CellResult) -> tuple:
    alg = ALGORITHMS.index(cell.algorithm_key) if cell.algorithm_key in ALGORITHMS else len(ALGORITHMS)
    return (-cell.metrics.f1s, alg, cell.order)


def select_best_rows(cells: Iterable[CellResult]) -> dict[tuple[str, str, str], CellResult]:
    """Per (dataset, embedding, version), the usable cell with the highest F1S.

    Ties go to the earlier algorithm in the fixed algorithm order, then to
    config order. Groups with no usable cell are left out with a warning.
    """
    groups: dict[tuple[str, str, str], list[CellResult]] = {}
    for c in cells:
        groups.setdefault((c.dataset, c.embedding, c.version), []).append(c)
    best = {}
    for key, members in groups.items():
        ok = [c for c in members if c.usable]
        if not ok:
            log.warning("no successful cell for %s/%s/%s; row omitted", *key)
            continue
        best[key] = min(ok, key=_rank)
    return best


def compute_totals(best_rows: dict[tuple[str, str, str], CellResult], dataset: str,
                   version: str = "full") -> dict[str, int] | None:
    """Count, per embedding, the metrics on which its best row is the strict
    maximum among the dataset's best rows. ``None`` with fewer than two rows."""
    rows = {emb: c for (ds, emb, ver), c in best_rows.items() if ds == dataset and ver == version}
    if len(rows) < 2:
        return None
    totals = {emb: 0 for emb in rows}
    for metric in METRICS:
        vals = {emb: getattr(c.metrics, metric) for emb, c in rows.items()}
        vals = {e: v for e, v in vals.items() if v is not None and not math.isnan(v)}
        if not vals:
            continue
        top = max(vals.values())
        leaders = [e for e, v in vals.items() if v == top]
        if len(leaders) == 1:
            totals[leaders[0]] += 1
    return totals


# --- formatting ------------------------------------------------------------

def _fmt_metric(name: str, v: float | None) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "n/a"
    if math.isinf(v):
        return "inf"
    if name == "ss":
        return f"{v:.3f}"
    if name == "chi":
        return f"{v:.0f}"
    return f"{v:.2f}"


def _md_table(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def best_rows_table(report: RunReport, version: str = "full") -> str:
    best = report.best_rows
    rows = []
    for ds in report.datasets():
        totals = compute_totals(best, ds, version)
        first = True
        for emb in report.embeddings():
            c = best.get((ds, emb, version))
            if c is None:
                continue
            total = "—" if totals is None else f"{totals[emb]}/5"
            rows.append([ds if first else "", emb, c.algorithm]
                        + [_fmt_metric(m, getattr(c.metrics, m)) for m in METRICS] + [total])
            first = False
    return _md_table(["Dataset", "Embed.", "Best Alg.", *METRIC_HEADERS, "Total"], rows)


def summary_table(report: RunReport) -> str:
    best = report.best_rows
    rows = []
    for ds in report.datasets():
        first = True
        for emb in report.embeddings():
            pair = [(ver, best.get((ds, emb, ver))) for ver in ("full", "summary")]
            if any(c is None for _, c in pair):
                continue
            for ver, c in pair:
                rows.append([ds if first else "", emb if ver == "full" else "",
                             ver.capitalize(), c.algorithm]
                            + [_fmt_metric(m, getattr(c.metrics, m)) for m in METRICS])
                first = False
    return _md_table(["DS", "Embed.", "Version", "Best Alg.", *METRIC_HEADERS], rows)


def size_table(report: RunReport) -> str | None:
    by_family: dict[str, list[str]] = {}
    for emb in report.embeddings():
        fam = report.families.get(emb)
        if fam:
            by_family.setdefault(fam, []).append(emb)
    shared = [embs for embs in by_family.values() if len(embs) > 1]
    if not shared:
        return None
    best = report.best_rows
    rows = []
    for ds in report.datasets():
        first = True
        for embs in shared:
            for emb in embs:
                c = best.get((ds, emb, "full"))
                if c is None:
                    continue
                rows.append([ds if first else "", emb, c.algorithm]
                            + [_fmt_metric(m, getattr(c.metrics, m)) for m in METRICS])
                first = False
    return _md_table(["Dataset", "Embed.", "Best Alg.", *METRIC_HEADERS], rows)


def write_grid_csv(report: RunReport, path) -> Path:
    """One row per cell in config order. No timings, so identical runs give
    identical bytes."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for c in report.cells:
            vals = [""] * len(METRICS) if c.metrics is None else \
                [repr(float(getattr(c.metrics, m))) for m in METRICS]
            w.writerow([c.dataset, c.embedding, c.version, c.algorithm, c.status, *vals])
    return path


def emit_reports(report: RunReport, output_dir) -> list[Path]:
    """Write grid.csv and the Markdown tables. Wall times stay in report.json
    and the cell artifacts so that every CSV is reproducible byte for byte."""
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = [write_grid_csv(report, out / "grid.csv")]
        p = out / "best_rows.md"
        p.write_text(best_rows_table(report), encoding="utf-8")
        written.append(p)
        if report.summarised:
            p = out / "summarisation.md"
            p.write_text(summary_table(report), encoding="utf-8")
            written.append(p)
        size = size_table(report)
        if size is not None:
            p = out / "model_size.md"
            p.write_text(size, encoding="utf-8")
            written.append(p)
    except OSError as exc:
        raise OSError(f"failed writing reports under {out}: {exc}") from exc
    return written
