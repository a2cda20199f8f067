"""Execute the dataset x embedding x algorithm grid with resumable cells."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .. import __version__
from ..cluster import run as run_clustering
from ..cluster.base import ClusterParams
from ..corpus import EMPTY_AFTER_PREPROCESSING, Corpus, load_corpus, preprocess_corpus
from ..evaluate import MetricReport, score_cell
from ..llm_io import (UNSUMMARISED, DiskCache, EndpointConfigError, RetryPolicy,
                      embed_corpus, load_embeddings_file, summarise)
from ..vectorize import VectorSet, align, tfidf_vectors
from .config import DatasetSpec, EmbeddingSpec, ExperimentConfig
from .report import CellResult, RunReport

log = logging.getLogger(__name__)

CODE_VERSION = f"textclust-{__version__}"


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _digest(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _write_json_atomic(path: Path, payload: dict) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
    os.replace(tmp, path)


@dataclass
class _Group:
    """Cells sharing one vector set: a (dataset, embedding, version) triple."""

    dataset: DatasetSpec
    embedding: EmbeddingSpec
    version: str
    identity: dict[str, Any]


def load_dataset(spec: DatasetSpec) -> Corpus:
    corpus = load_corpus(spec.path, spec.format, name=spec.name)
    if spec.preprocess:
        corpus = preprocess_corpus(corpus)
    return corpus


def embedding_identity(spec: EmbeddingSpec, dataset: str, version: str,
                       cfg: ExperimentConfig) -> dict[str, Any]:
    ident: dict[str, Any] = {"name": spec.name, "kind": spec.kind}
    if spec.kind == "tfidf":
        ident["tfidf"] = asdict(spec.tfidf)
    elif spec.kind == "file":
        path = spec.source(dataset, summary=version == "summary").path
        ident["file_sha256"] = _sha256_file(path)
        ident["model"] = spec.model
    else:
        ident.update(endpoint=spec.endpoint, model=spec.model)
    if version == "summary":
        ident["summariser"] = asdict(cfg.summarise)
    return ident


def cell_identity(corpus_hash: str, group: _Group, params: ClusterParams,
                  label_level: int, one_to_one: bool) -> str:
    return _digest({
        "corpus": corpus_hash,
        "label_level": label_level,
        "embedding": group.identity,
        "version": group.version,
        "params": params.to_dict(),
        "one_to_one": one_to_one,
        "code": CODE_VERSION,
    })


def build_vectors(corpus: Corpus, spec: EmbeddingSpec, version: str, cache: DiskCache,
                  retry: RetryPolicy, session=None) -> VectorSet:
    if spec.kind == "tfidf":
        vs, _ = tfidf_vectors(corpus, spec.tfidf)
        return vs
    source = spec.source(corpus.name, summary=version == "summary")
    if spec.kind == "file":
        vs = load_embeddings_file(source.path, source.model_name)
        return align(vs, corpus.ids)
    return embed_corpus(corpus.documents, source, cache, retry, session)


def _run_cell(X: np.ndarray, truth: np.ndarray, params: ClusterParams,
              one_to_one: bool) -> tuple[MetricReport, list[int], float]:
    t0 = time.perf_counter()
    assignment = run_clustering(X, params)
    metrics = score_cell(X, assignment, truth, one_to_one=one_to_one)
    return metrics, assignment.hard_labels.tolist(), time.perf_counter() - t0


def run_grid(cfg: ExperimentConfig, output_dir=None, workers: int | None = None,
             retry: RetryPolicy = RetryPolicy(), session=None) -> RunReport:
    """Run every configured cell, reusing artifacts of earlier successful runs.

    Artifacts land in ``<output_dir>/cells/<cell_id>.json``; the assembled
    report is saved as ``<output_dir>/report.json``. Per-cell failures are
    recorded and never stop the grid; an endpoint rejecting the request
    (HTTP 4xx) is a configuration error and does.
    """
    cfg.validate()
    out = Path(output_dir or cfg.output_dir)
    cells_dir = out / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_raw(), indent=2) + "\n", encoding="utf-8")
    cache = DiskCache(cfg.cache_dir)
    workers = workers or cfg.workers
    notes: list[str] = []
    if cfg.summarise is not None:
        notes.extend(cfg.summarise.decode.warnings())

    versions = ["full"] + (["summary"] if cfg.summarise is not None else [])
    results: list[CellResult] = []
    order = 0
    pool = ThreadPoolExecutor(max_workers=workers)
    try:
        for ds in cfg.datasets:
            corpus = load_dataset(ds)
            empties = corpus.flagged(EMPTY_AFTER_PREPROCESSING)
            if empties:
                notes.append(f"{ds.name}: {len(empties)} document(s) empty after preprocessing")
            truth = np.asarray(corpus.labels(ds.label_level), dtype=object)
            k = corpus.class_count(ds.label_level)
            corpus_hash = corpus.content_hash()
            summarised_corpus = None

            for emb in cfg.embeddings:
                for version in versions:
                    if version == "summary" and not emb.supports_summary():
                        continue
                    group = _Group(ds, emb, version,
                                   embedding_identity(emb, ds.name, version, cfg))
                    planned = []
                    for alg in cfg.algorithms:
                        params = cfg.params_for(alg, k)
                        cid = cell_identity(corpus_hash, group, params, ds.label_level,
                                            cfg.one_to_one_mapping)
                        cell = CellResult(cell_id=cid, dataset=ds.name, embedding=emb.name,
                                          algorithm=alg.label, algorithm_key=alg.algorithm,
                                          version=version, order=order)
                        order += 1
                        planned.append((cell, params))

                    pending = []
                    for cell, params in planned:
                        art = cells_dir / f"{cell.cell_id}.json"
                        if art.exists():
                            prev = json.loads(art.read_text(encoding="utf-8"))
                            if prev.get("status") == "ok":
                                cell.status = "skipped-cache"
                                cell.metrics = MetricReport(**prev["metrics"])
                                cell.wall_time = prev.get("wall_time", 0.0)
                                continue
                        pending.append((cell, params))
                    results.extend(c for c, _ in planned)
                    if not pending:
                        continue

                    try:
                        source_corpus = corpus
                        if version == "summary":
                            if summarised_corpus is None:
                                summarised_corpus = corpus.map(
                                    lambda d: summarise(d, cfg.summarise, cache, retry, session))
                                missed = summarised_corpus.flagged(UNSUMMARISED)
                                if missed:
                                    notes.append(f"{ds.name}: {len(missed)} document(s) unsummarised")
                            source_corpus = summarised_corpus
                        vs = build_vectors(source_corpus, emb, version, cache, retry, session)
                        if vs.zero_rows:
                            notes.append(f"{ds.name}/{emb.name}/{version}: "
                                         f"{len(vs.zero_rows)} zero vector row(s)")
                        X = vs.dense()
                    except EndpointConfigError:
                        raise
                    except Exception as exc:  # noqa: BLE001 - recorded per cell
                        log.error("vectors for %s/%s/%s failed: %s", ds.name, emb.name, version, exc)
                        for cell, params in pending:
                            cell.status = "failed"
                            cell.error = f"vectors: {exc}"
                            _save_cell(cells_dir, cell, params, None)
                        continue

                    futures = [(cell, params, pool.submit(_run_cell, X, truth, params,
                                                          cfg.one_to_one_mapping))
                               for cell, params in pending]
                    for cell, params, fut in futures:
                        try:
                            metrics, labels, elapsed = fut.result()
                        except Exception as exc:  # noqa: BLE001 - recorded per cell
                            log.error("cell %s failed: %s", cell.cell_id[:12], exc)
                            cell.status = "failed"
                            cell.error = str(exc)
                            _save_cell(cells_dir, cell, params, None)
                            continue
                        cell.status = "ok"
                        cell.metrics = metrics
                        cell.wall_time = elapsed
                        _save_cell(cells_dir, cell, params, labels)
    finally:
        pool.shutdown(wait=True)

    report = RunReport(
        name=cfg.name, cells=results,
        families={e.name: e.family for e in cfg.embeddings if e.family},
        summarised=cfg.summarise is not None, notes=notes,
    )
    report.save(out / "report.json")
    return report


def _save_cell(cells_dir: Path, cell: CellResult, params: ClusterParams,
               labels: list[int] | None) -> None:
    payload = cell.to_dict()
    payload["params"] = params.to_dict()
    payload["labels"] = labels
    payload["code_version"] = CODE_VERSION
    _write_json_atomic(cells_dir / f"{cell.cell_id}.json", payload)


def load_cell(run_dir, cell_id: str) -> dict[str, Any]:
    cells_dir = Path(run_dir) / "cells"
    matches = sorted(cells_dir.glob(f"{cell_id}*.json"))
    if not matches:
        raise FileNotFoundError(f"no cell artifact matching {cell_id!r} in {cells_dir}")
    if len(matches) > 1:
        raise ValueError(f"cell id prefix {cell_id!r} is ambiguous ({len(matches)} matches)")
    return json.loads(matches[0].read_text(encoding="utf-8"))
