"""Experiment configuration (TOML).

Example::

    output_dir = "runs/cstr"
    cache_dir = ".cache"

    [[datasets]]
    name = "DS1"
    path = "data/cstr.jsonl"
    label_level = 1

    [[embeddings]]
    name = "TF-IDF"
    kind = "tfidf"            # min_df, max_df, max_features

    [[embeddings]]
    name = "BERT"
    kind = "file"
    path = "emb/{dataset}/bert.jsonl"
    model = "sentence-transformers/all-mpnet-base-v2"

    [[algorithms]]
    algorithm = "kmeans"      # seed, init, n_init, max_iter, tol, m, error, maxiter, gamma

Relative paths are resolved against the directory of the config file.
``{dataset}`` in embedding paths is replaced by the dataset name.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..cluster.base import (ALGORITHMS, ClusteringError, ClusterParams, FuzzyOptions,
                            KMeansOptions, SpectralOptions)
from ..llm_io import DecodeParams, EmbeddingSource, SummariserConfig
from ..vectorize import TfidfConfig

ALGORITHM_NAMES = {
    "kmeans": "k-means",
    "kmeans_pp": "k-means++",
    "ahc_ward": "AHC",
    "fuzzy_cm": "FuzzyCM",
    "spectral": "Spectral",
}

_KMEANS_KEYS = {"init", "n_init", "max_iter", "tol"}
_FUZZY_KEYS = {"m", "error", "maxiter"}
_SPECTRAL_KEYS = {"assign_labels", "gamma", "max_dense"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: str
    format: str | None = None
    label_level: int = 1
    preprocess: bool = True


@dataclass(frozen=True)
class EmbeddingSpec:
    name: str
    kind: str
    tfidf: TfidfConfig | None = None
    path: str | None = None
    summary_path: str | None = None
    model: str | None = None
    endpoint: str | None = None
    api_key_env: str | None = None
    batch_size: int = 64
    family: str | None = None

    def source(self, dataset: str, summary: bool = False) -> EmbeddingSource:
        if self.kind == "file":
            template = self.summary_path if summary else self.path
            return EmbeddingSource("file", self.model or self.name,
                                   path=template.replace("{dataset}", dataset))
        return EmbeddingSource("http", self.model or self.name, endpoint_url=self.endpoint,
                               model_id=self.model, api_key_env=self.api_key_env,
                               batch_size=self.batch_size)

    def supports_summary(self) -> bool:
        return self.kind != "file" or self.summary_path is not None


@dataclass(frozen=True)
class AlgorithmSpec:
    algorithm: str
    options: dict[str, Any] = field(default_factory=dict)
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name or ALGORITHM_NAMES[self.algorithm]

    def params(self, k: int, seed_override: int | None = None) -> ClusterParams:
        opts = dict(self.options)
        over: dict[str, Any] = {}
        if "seed" in opts:
            over["seed"] = int(opts.pop("seed"))
        if seed_override is not None:
            over["seed"] = int(seed_override)
        defaults = ClusterParams.default(self.algorithm, k)
        groups = (("kmeans", _KMEANS_KEYS, defaults.kmeans, KMeansOptions),
                  ("fuzzy", _FUZZY_KEYS, defaults.fuzzy, FuzzyOptions),
                  ("spectral", _SPECTRAL_KEYS, defaults.spectral, SpectralOptions))
        for attr, keys, base, typ in groups:
            picked = {key: opts.pop(key) for key in list(opts) if key in keys}
            if picked:
                over[attr] = typ(**{**asdict(base), **picked})
        if opts:
            raise ConfigError(f"unknown option(s) for {self.algorithm}: {sorted(opts)}")
        return ClusterParams.default(self.algorithm, k, **over)


@dataclass
class ExperimentConfig:
    datasets: list[DatasetSpec]
    embeddings: list[EmbeddingSpec]
    algorithms: list[AlgorithmSpec]
    output_dir: str = "runs/default"
    cache_dir: str = ".cache/textclust"
    summarise: SummariserConfig | None = None
    seed_overrides: dict[str, int] = field(default_factory=dict)
    workers: int = 1
    one_to_one_mapping: bool = False
    name: str = "experiment"

    def validate(self, check_files: bool = True) -> None:
        if not self.datasets:
            raise ConfigError("at least one dataset is required")
        if not self.embeddings:
            raise ConfigError("at least one embedding is required")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for group, items in (("dataset", self.datasets), ("embedding", self.embeddings)):
            names = [x.name for x in items]
            dupes = {n for n in names if names.count(n) > 1}
            if dupes:
                raise ConfigError(f"duplicate {group} name(s): {sorted(dupes)}")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ConfigError("algorithm entries need distinct names; set 'name' on repeats")
        for alg in self.seed_overrides:
            if alg not in ALGORITHMS:
                raise ConfigError(f"seed override for unknown algorithm {alg!r}")
        for a in self.algorithms:
            try:
                a.params(2)
            except (ClusteringError, TypeError) as exc:
                raise ConfigError(f"algorithm {a.label}: {exc}") from None
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not check_files:
            return
        for ds in self.datasets:
            if not Path(ds.path).exists():
                raise ConfigError(f"dataset {ds.name}: file not found: {ds.path}")
            for emb in self.embeddings:
                if emb.kind == "file":
                    p = emb.path.replace("{dataset}", ds.name)
                    if not Path(p).exists():
                        raise ConfigError(f"embedding {emb.name}: file not found: {p}")

    def params_for(self, alg: AlgorithmSpec, k: int) -> ClusterParams:
        return alg.params(k, self.seed_overrides.get(alg.algorithm))

    def to_raw(self) -> dict[str, Any]:
        """Inverse of :func:`config_from_dict` (paths already absolute)."""
        embs = []
        for e in self.embeddings:
            if e.kind == "tfidf":
                entry = {"name": e.name, "kind": "tfidf", "family": e.family,
                         **asdict(e.tfidf)}
                if entry["max_features"] is None:
                    entry["max_features"] = 0
            else:
                entry = {k: v for k, v in asdict(e).items() if k != "tfidf"}
            embs.append({k: v for k, v in entry.items() if v is not None})
        raw = {
            "name": self.name,
            "output_dir": self.output_dir,
            "cache_dir": self.cache_dir,
            "workers": self.workers,
            "one_to_one_mapping": self.one_to_one_mapping,
            "seeds": dict(self.seed_overrides),
            "datasets": [{k: v for k, v in asdict(d).items() if v is not None}
                         for d in self.datasets],
            "embeddings": embs,
            "algorithms": [{"algorithm": a.algorithm, **a.options,
                            **({"name": a.name} if a.name else {})}
                           for a in self.algorithms],
        }
        if self.summarise is not None:
            s = asdict(self.summarise)
            raw["summarise"] = {
                "endpoint": s.pop("endpoint_url"), "model": s.pop("model_id"),
                **{k: v for k, v in s.items() if v is not None},
            }
        return raw


def _resolve(base: Path, p: str | None) -> str | None:
    if p is None:
        return None
    path = Path(p).expanduser()
    return str(path if path.is_absolute() else (base / path))


def _embedding_from_dict(d: dict, base: Path) -> EmbeddingSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    name = d.pop("name", None)
    if not name or kind not in ("tfidf", "file", "http"):
        raise ConfigError(f"embedding entries need a name and kind in tfidf/file/http: {d}")
    if kind == "tfidf":
        keys = {"min_df", "max_df", "max_features"}
        opts = {k: d.pop(k) for k in list(d) if k in keys}
        # TOML has no null: max_features = 0 means no cap
        if opts.get("max_features") == 0:
            opts["max_features"] = None
        cfg = TfidfConfig(**opts)
        family = d.pop("family", None)
        if d:
            raise ConfigError(f"unknown tfidf option(s): {sorted(d)}")
        return EmbeddingSpec(name, "tfidf", tfidf=cfg, family=family)
    if kind == "file" and "path" not in d:
        raise ConfigError(f"embedding {name}: file source needs 'path'")
    if kind == "http" and "endpoint" not in d:
        raise ConfigError(f"embedding {name}: http source needs 'endpoint'")
    known = {"path", "summary_path", "model", "endpoint", "api_key_env", "batch_size", "family"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"embedding {name}: unknown option(s) {sorted(unknown)}")
    d["path"] = _resolve(base, d.get("path"))
    d["summary_path"] = _resolve(base, d.get("summary_path"))
    return EmbeddingSpec(name, kind, **d)


def _summariser_from_dict(d: dict) -> SummariserConfig:
    d = dict(d)
    decode = DecodeParams(**d.pop("decode", {}))
    try:
        return SummariserConfig(
            endpoint_url=d.pop("endpoint"), model_id=d.pop("model"),
            max_input_tokens=int(d.pop("max_input_tokens")), decode=decode, **d)
    except KeyError as exc:
        raise ConfigError(f"summarise section is missing {exc}") from None


def config_from_dict(raw: dict, base_dir=".") -> ExperimentConfig:
    base = Path(base_dir)
    try:
        datasets = [
            DatasetSpec(name=d["name"], path=_resolve(base, d["path"]), format=d.get("format"),
                        label_level=int(d.get("label_level", 1)),
                        preprocess=bool(d.get("preprocess", True)))
            for d in raw.get("datasets", [])
        ]
    except KeyError as exc:
        raise ConfigError(f"dataset entry is missing {exc}") from None
    embeddings = [_embedding_from_dict(e, base) for e in raw.get("embeddings", [])]
    algs_raw = raw.get("algorithms")
    if algs_raw is None:
        algs_raw = [{"algorithm": a} for a in ALGORITHMS]
    algorithms = []
    for a in algs_raw:
        a = dict(a)
        alg = a.pop("algorithm", None)
        if alg not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {alg!r}; choose from {ALGORITHMS}")
        name = a.pop("name", None)
        algorithms.append(AlgorithmSpec(alg, a, name))
    summ = raw.get("summarise")
    if summ is not None and summ.get("enabled", True):
        summ = {k: v for k, v in summ.items() if k != "enabled"}
        summariser = _summariser_from_dict(summ)
    else:
        summariser = None
    return ExperimentConfig(
        datasets=datasets, embeddings=embeddings, algorithms=algorithms,
        output_dir=_resolve(base, raw.get("output_dir", "runs/default")),
        cache_dir=_resolve(base, raw.get("cache_dir", ".cache/textclust")),
        summarise=summariser, seed_overrides=dict(raw.get("seeds", {})),
        workers=int(raw.get("workers", 1)),
        one_to_one_mapping=bool(raw.get("one_to_one_mapping", False)),
        name=raw.get("name", "experiment"),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    cfg = config_from_dict(raw, path.parent)
    if "name" not in raw:
        cfg.name = path.stem
    return cfg
