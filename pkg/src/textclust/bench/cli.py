"""``bench`` command line: run a grid, rebuild reports, project a cell to 2-D."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..llm_io import DiskCache, RetryPolicy
from ..project import (TSNE_MAX_POINTS, ProjectionConfig, TsneConfig, export_projection,
                       subsample_per_class, tsne)
from .config import ConfigError, EmbeddingSpec, config_from_dict, load_config
from .report import RunReport, emit_reports
from .runner import build_vectors, load_cell, load_dataset, run_grid

log = logging.getLogger("textclust.bench")


def _embedding_override(value: str, model: str | None) -> EmbeddingSpec:
    kind, sep, target = value.partition(":")
    if not sep or kind not in ("file", "http"):
        raise ConfigError("--embeddings must be file:PATH or http:URL")
    if kind == "file":
        path = str(Path(target).resolve())
        name = model or Path(target).stem
        return EmbeddingSpec(name=name, kind="file", path=path, model=model)
    return EmbeddingSpec(name=model or "http", kind="http", endpoint=target, model=model)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg.output_dir = str(Path(args.output_dir).resolve())
    if args.cache_dir:
        cfg.cache_dir = str(Path(args.cache_dir).resolve())
    if args.workers:
        cfg.workers = args.workers
    if args.embeddings:
        cfg.embeddings = [_embedding_override(args.embeddings, args.model)]
    if args.summarise == "off":
        cfg.summarise = None
    elif args.summarise == "on" and cfg.summarise is None:
        raise ConfigError("--summarise on needs a [summarise] section in the config")
    retry = RetryPolicy(base_delay=args.retry_delay)
    report = run_grid(cfg, retry=retry)
    written = emit_reports(report, cfg.output_dir)
    n_ok = sum(c.status in ("ok", "skipped-cache") for c in report.cells)
    print(f"{n_ok}/{len(report.cells)} cells ok; reports in {cfg.output_dir}")
    for path in written:
        print(f"  {path}")
    for note in report.notes:
        print(f"note: {note}")
    return 0 if report.all_ok else 1


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    report = RunReport.load(run_dir / "report.json")
    for path in emit_reports(report, run_dir):
        print(path)
    return 0 if report.all_ok else 1


def cmd_project(args) -> int:
    run_dir = Path(args.run_dir)
    cell = load_cell(run_dir, args.cell)
    cfg = config_from_dict(json.loads((run_dir / "config.json").read_text(encoding="utf-8")))
    ds = next(d for d in cfg.datasets if d.name == cell["dataset"])
    emb = next(e for e in cfg.embeddings if e.name == cell["embedding"])
    corpus = load_dataset(ds)
    if cell.get("version") == "summary":
        raise ConfigError("projecting summary cells is not supported; project the full version")
    vs = build_vectors(corpus, emb, "full", DiskCache(cfg.cache_dir), RetryPolicy())
    if args.color == "pred":
        if cell.get("labels") is None:
            raise ConfigError(f"cell {cell['cell_id'][:12]} has no labels (status {cell['status']})")
        labels = np.asarray([str(x) for x in cell["labels"]])
    else:
        labels = np.asarray(corpus.labels(ds.label_level))
    keep = subsample_per_class(labels, TSNE_MAX_POINTS, seed=args.seed)
    sub = vs.subset(keep)
    pcfg = ProjectionConfig(pca_dims=args.pca_dims,
                            tsne=TsneConfig(perplexity=args.perplexity,
                                            iterations=args.iterations, seed=args.seed))
    proj = tsne(sub, pcfg)
    out = Path(args.out) if args.out else run_dir / "projections" / cell["cell_id"][:16]
    csv_path, svg_path = export_projection(proj, labels[keep].tolist(), out)
    print(csv_path)
    print(svg_path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute an experiment grid")
    p.add_argument("--config", required=True, help="experiment TOML file")
    p.add_argument("--output-dir")
    p.add_argument("--cache-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--embeddings", help="replace configured embeddings: file:PATH or http:URL")
    p.add_argument("--model", help="model name/id for --embeddings")
    p.add_argument("--summarise", choices=("on", "off"))
    p.add_argument("--retry-delay", type=float, default=1.0,
                   help="base delay in seconds for HTTP retry backoff")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="rebuild CSV/Markdown reports from a run directory")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("project", help="PCA + t-SNE projection of one cell's vectors")
    p.add_argument("--cell", required=True, help="cell id or unique prefix")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out", help="output path stem (writes .csv and .svg)")
    p.add_argument("--color", choices=("truth", "pred"), default="truth")
    p.add_argument("--pca-dims", type=int, default=50)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_project)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
