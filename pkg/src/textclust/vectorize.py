"""TF-IDF baseline vectors and the VectorSet container shared by all embeddings."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import regex
import scipy.sparse as sp

from .corpus import Corpus

_TOKEN = regex.compile(r"[^\W_]+")


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class TfidfConfig:
    min_df: int = 5
    max_df: float = 0.95
    max_features: int | None = 8000

    def __post_init__(self):
        if int(self.min_df) != self.min_df or self.min_df < 1:
            raise ValueError(f"min_df must be an integer >= 1, got {self.min_df}")
        if not 0 < self.max_df <= 1:
            raise ValueError(f"max_df must be in (0, 1], got {self.max_df}")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError(f"max_features must be >= 1, got {self.max_features}")


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[tuple[str, int], ...]

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, (t, _) in enumerate(self.terms)}

    @property
    def words(self) -> list[str]:
        return [t for t, _ in self.terms]

    def to_tsv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for term, df in self.terms:
                fh.write(f"{term}\t{df}\n")
        return path

    @classmethod
    def from_tsv(cls, path) -> "Vocabulary":
        terms = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    term, df = line.split("\t")
                    terms.append((term, int(df)))
        return cls(tuple(terms))


@dataclass
class VectorSet:
    """Row-aligned document vectors.

    ``matrix`` is a dense ndarray or a scipy CSR matrix. ``provenance`` is
    ``"tfidf"`` or ``"external:<model>"``.
    """

    matrix: np.ndarray | sp.csr_matrix
    row_ids: list[str]
    provenance: str
    zero_rows: list[str] = field(default_factory=list)

    def __post_init__(self):
        n = self.matrix.shape[0]
        if n != len(self.row_ids):
            raise ValueError(f"{n} rows but {len(self.row_ids)} ids")
        data = self.matrix.data if sp.issparse(self.matrix) else self.matrix
        if not np.all(np.isfinite(data)):
            raise ValueError("vector set contains NaN or Inf entries")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return np.asarray(self.matrix.toarray(), dtype=np.float64)
        return np.asarray(self.matrix, dtype=np.float64)

    def subset(self, idx) -> "VectorSet":
        idx = np.asarray(idx)
        ids = [self.row_ids[i] for i in idx]
        keep = set(ids)
        return VectorSet(self.matrix[idx], ids, self.provenance,
                         [r for r in self.zero_rows if r in keep])


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs of two or more characters."""
    return [t for t in _TOKEN.findall(text.lower()) if len(t) >= 2]


def fit_vocabulary(corpus: Corpus, cfg: TfidfConfig = TfidfConfig()) -> Vocabulary:
    n_docs = len(corpus)
    df: Counter[str] = Counter()
    tf: Counter[str] = Counter()
    for text in corpus.texts:
        toks = tokenize(text)
        tf.update(toks)
        df.update(set(toks))

    max_count = cfg.max_df * n_docs
    survivors = [t for t, d in df.items() if d >= cfg.min_df and d <= max_count]
    if not survivors:
        raise VocabularyError("empty vocabulary")
    if cfg.max_features is not None and len(survivors) > cfg.max_features:
        survivors.sort(key=lambda t: (-tf[t], t))
        survivors = survivors[: cfg.max_features]
    survivors.sort()
    return Vocabulary(tuple((t, df[t]) for t in survivors))


def idf_weights(vocab: Vocabulary, n_docs: int) -> np.ndarray:
    dfs = np.array([d for _, d in vocab.terms], dtype=np.float64)
    return np.log((1.0 + n_docs) / (1.0 + dfs)) + 1.0


def transform(corpus: Corpus, vocab: Vocabulary) -> VectorSet:
    """Smoothed-idf TF-IDF rows, L2 normalised, as a CSR matrix.

    Document frequencies come from the vocabulary (fit time); ``N`` is the
    size of the fitted corpus, which is taken to be ``corpus``.
    """
    index = vocab.index
    idf = idf_weights(vocab, len(corpus))
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    zero_rows = []
    for doc in corpus.documents:
        counts = Counter(index[t] for t in tokenize(doc.text) if t in index)
        cols = sorted(counts)
        vals = np.array([counts[c] * idf[c] for c in cols], dtype=np.float64)
        norm = math.sqrt(float(np.dot(vals, vals))) if len(vals) else 0.0
        if norm == 0.0:
            zero_rows.append(doc.id)
        else:
            vals = vals / norm
        indices.extend(cols)
        data.extend(vals.tolist())
        indptr.append(len(indices))
    mat = sp.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64),
         np.array(indptr, dtype=np.int64)),
        shape=(len(corpus), len(vocab)),
    )
    return VectorSet(mat, corpus.ids, "tfidf", zero_rows)


def tfidf_vectors(corpus: Corpus, cfg: TfidfConfig = TfidfConfig()) -> tuple[VectorSet, Vocabulary]:
    vocab = fit_vocabulary(corpus, cfg)
    return transform(corpus, vocab), vocab


class AlignmentError(KeyError):
    pass


def align(vs: VectorSet, ids: Sequence[str], allow_extra: bool = False) -> VectorSet:
    """Reorder rows of ``vs`` to follow the corpus ``ids``.

    Every corpus id needs a vector. Vectors whose id is not in the corpus
    are an error unless ``allow_extra`` is set.
    """
    pos = {rid: i for i, rid in enumerate(vs.row_ids)}
    missing = [i for i in ids if i not in pos]
    if missing:
        shown = ", ".join(repr(m) for m in missing[:5])
        raise AlignmentError(f"{len(missing)} corpus id(s) have no vector: {shown}")
    if not allow_extra:
        known = set(ids)
        extra = [r for r in vs.row_ids if r not in known]
        if extra:
            shown = ", ".join(repr(m) for m in extra[:5])
            raise AlignmentError(f"{len(extra)} vector id(s) missing from corpus: {shown}")
    return vs.subset([pos[i] for i in ids])
