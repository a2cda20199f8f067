"""Labeled text corpora: loading, saving and cleaning.

Corpora live on disk as JSONL (one ``{"id", "text", "label", "label2"}``
object per line) or as CSV with an ``id,text,label[,label2]`` header.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
import string
import unicodedata
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import regex

EMPTY_AFTER_PREPROCESSING = "empty-after-preprocessing"

REQUIRED_FIELDS = ("id", "text", "label")


class CorpusError(ValueError):
    pass


class RecordError(CorpusError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    label: str
    label2: str | None = None
    flags: tuple[str, ...] = ()

    def with_flag(self, flag: str) -> "Document":
        if flag in self.flags:
            return self
        return replace(self, flags=self.flags + (flag,))

    def label_at(self, level: int) -> str:
        if level == 1:
            return self.label
        if level == 2:
            if self.label2 is None:
                raise CorpusError(f"document {self.id!r} has no level-2 label")
            return self.label2
        raise CorpusError(f"label level must be 1 or 2, got {level}")


@dataclass
class Corpus:
    name: str
    documents: list[Document]
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        if not self.documents:
            raise CorpusError("empty corpus")
        seen = set()
        for doc in self.documents:
            if not doc.id:
                raise CorpusError("document id must be non-empty")
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.documents]

    @property
    def texts(self) -> list[str]:
        return [d.text for d in self.documents]

    def labels(self, level: int = 1) -> list[str]:
        return [d.label_at(level) for d in self.documents]

    def class_count(self, level: int = 1) -> int:
        return len(set(self.labels(level)))

    @property
    def class_counts(self) -> dict[int, int]:
        counts = {1: self.class_count(1)}
        if all(d.label2 is not None for d in self.documents):
            counts[2] = self.class_count(2)
        return counts

    def flagged(self, flag: str) -> list[str]:
        return [d.id for d in self.documents if flag in d.flags]

    def map(self, fn) -> "Corpus":
        return Corpus(self.name, [fn(d) for d in self.documents], list(self.rejected))

    def content_hash(self) -> str:
        """Stable SHA-256 over ids, texts and labels in document order."""
        h = hashlib.sha256()
        for d in self.documents:
            rec = [d.id, d.text, d.label, d.label2]
            h.update(json.dumps(rec, ensure_ascii=False).encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


def _record_to_document(rec: dict, line: int) -> Document:
    if not isinstance(rec, dict):
        raise RecordError(line, "record is not an object")
    missing = [f for f in REQUIRED_FIELDS if rec.get(f) is None]
    if missing:
        raise RecordError(line, f"missing field(s): {', '.join(missing)}")
    label2 = rec.get("label2")
    if label2 == "":
        label2 = None
    return Document(
        id=str(rec["id"]),
        text=str(rec["text"]),
        label=str(rec["label"]),
        label2=None if label2 is None else str(label2),
    )


def _iter_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield lineno, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise RecordError(lineno, f"invalid JSON ({exc.msg})") from None


def _iter_csv(path: Path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        for rec in reader:
            # reader.line_num is the physical line the record ended on
            yield reader.line_num, rec


def load_corpus(path, format: str | None = None, name: str | None = None,
                strict: bool = True) -> Corpus:
    """Read a corpus from ``path``, keeping file order.

    With ``strict=False`` malformed records are skipped and listed in
    ``Corpus.rejected`` as ``(line, message)``; duplicate ids are always fatal.
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format not in ("jsonl", "csv"):
        raise CorpusError(f"unknown corpus format {format!r}")
    if not path.exists():
        raise FileNotFoundError(path)

    records = _iter_jsonl(path) if format == "jsonl" else _iter_csv(path)
    docs: list[Document] = []
    rejected: list[tuple[int, str]] = []
    seen: dict[str, int] = {}
    for lineno, rec in records:
        try:
            doc = _record_to_document(rec, lineno)
        except RecordError as exc:
            if strict:
                raise
            rejected.append((exc.line, str(exc)))
            continue
        if doc.id in seen:
            raise CorpusError(
                f"duplicate document id {doc.id!r} (lines {seen[doc.id]} and {lineno})")
        seen[doc.id] = lineno
        docs.append(doc)
    if not docs:
        raise CorpusError("empty corpus")
    return Corpus(name or path.stem, docs, rejected)


def save_corpus(corpus: Corpus, path, format: str | None = None) -> Path:
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "jsonl":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for d in corpus.documents:
                rec = {"id": d.id, "text": d.text, "label": d.label}
                if d.label2 is not None:
                    rec["label2"] = d.label2
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    elif format == "csv":
        has_l2 = any(d.label2 is not None for d in corpus.documents)
        cols = ["id", "text", "label"] + (["label2"] if has_l2 else [])
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for d in corpus.documents:
                row = [d.id, d.text, d.label]
                if has_l2:
                    row.append(d.label2 or "")
                writer.writerow(row)
    else:
        raise CorpusError(f"unknown corpus format {format!r}")
    return path


# --- preprocessing ---------------------------------------------------------

_ASCII_PUNCT = re.escape(string.punctuation)
# Anything that is not a Latin-script letter, an ASCII digit, whitespace,
# ASCII punctuation or a combining diacritic gets dropped.
_DISALLOWED = regex.compile(
    r"[^[\p{Script=Latin}&&\p{L}]0-9\s\x1c-\x1f" + _ASCII_PUNCT + r"\u0300-\u036F]",
    regex.V1,
)
_TAG = re.compile(r"<!--.*?-->|<!\[CDATA\[.*?\]\]>|</?[A-Za-z][^<>]*>|<![A-Za-z][^<>]*>",
                  re.DOTALL)
_EMAIL = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}")
_WS = re.compile(r"\s+")


def is_allowed_char(ch: str) -> bool:
    return _DISALLOWED.match(ch) is None


def _sub_until_stable(pattern: re.Pattern, text: str) -> str:
    while True:
        text, n = pattern.subn(" ", text)
        if n == 0:
            return text


def clean_text(text: str) -> str:
    # Character filtering runs first so that removing a character can never
    # glue together a new tag or e-mail address for a later pass to find.
    text = _DISALLOWED.sub("", text)
    text = unicodedata.normalize("NFC", text)
    text = _sub_until_stable(_TAG, text)
    text = _sub_until_stable(_EMAIL, text)
    return _WS.sub(" ", text).strip()


def preprocess(doc: Document) -> Document:
    cleaned = clean_text(doc.text)
    out = replace(doc, text=cleaned)
    if not cleaned:
        out = out.with_flag(EMPTY_AFTER_PREPROCESSING)
    return out


def preprocess_corpus(corpus: Corpus) -> Corpus:
    return corpus.map(preprocess)


def documents_from_records(records: Iterable[dict]) -> list[Document]:
    return [_record_to_document(r, i) for i, r in enumerate(records, start=1)]


def make_corpus(name: str, texts: Sequence[str], labels: Sequence[str],
                ids: Sequence[str] | None = None) -> Corpus:
    if ids is None:
        ids = [f"d{i}" for i in range(len(texts))]
    return Corpus(name, [Document(str(i), t, str(l)) for i, t, l in zip(ids, texts, labels)])
