"""External embeddings and LLM summaries.

Embeddings come either from JSONL files produced elsewhere or from an
OpenAI-style HTTP endpoint. Summaries come from an OpenAI-style chat
endpoint. Every upstream result is stored in a content-addressed disk cache
so a given (model, text, parameters) triple is requested at most once.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import requests

from .corpus import Document
from .vectorize import VectorSet

log = logging.getLogger(__name__)

PROMPT_TEMPLATE = (
    "Write a concise summary of the text. Return your responses with maximum 5 "
    "sentences that cover the key points of the text.\n{text}\nSUMMARY:"
)
UNSUMMARISED = "unsummarised"


class EmbeddingFileError(ValueError):
    pass


class EndpointConfigError(RuntimeError):
    """The endpoint rejected the request (HTTP 4xx): retrying will not help."""


class EndpointUnavailable(RuntimeError):
    """Transient failures persisted through every retry."""


# --- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingSource:
    """Where an embedding comes from: ``kind`` is ``"file"`` or ``"http"``."""

    kind: str
    model_name: str
    path: str | None = None
    endpoint_url: str | None = None
    model_id: str | None = None
    api_key_env: str | None = None
    batch_size: int = 64
    timeout: float = 60.0

    def __post_init__(self):
        if not self.model_name:
            raise ValueError("model_name must be non-empty")
        if self.kind not in ("file", "http"):
            raise ValueError(f"unknown embedding source kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ValueError("file embedding source needs a path")
        if self.kind == "http" and not self.endpoint_url:
            raise ValueError("http embedding source needs an endpoint_url")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def request_model(self) -> str:
        return self.model_id or self.model_name


@dataclass(frozen=True)
class DecodeParams:
    temperature: float = 0.0
    max_length: int = 800
    do_sample: bool = True
    top_k: int = 10
    num_return_sequences: int = 1

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.num_return_sequences < 1:
            raise ValueError("num_return_sequences must be >= 1")
        if self.do_sample and self.top_k < 1:
            raise ValueError("top_k must be >= 1 when sampling")

    def warnings(self) -> list[str]:
        notes = []
        if self.do_sample and self.temperature == 0:
            notes.append("decode: do_sample=True with temperature=0 is contradictory; "
                         "values forwarded unchanged")
        return notes


@dataclass(frozen=True)
class SummariserConfig:
    endpoint_url: str
    model_id: str
    max_input_tokens: int
    prompt_template: str = PROMPT_TEMPLATE
    decode: DecodeParams = field(default_factory=DecodeParams)
    api_key_env: str | None = None
    timeout: float = 120.0

    def __post_init__(self):
        if self.max_input_tokens <= 0:
            raise ValueError("max_input_tokens must be > 0")
        if self.prompt_template.count("{text}") != 1:
            raise ValueError("prompt_template must contain exactly one {text} placeholder")


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    base_delay: float = 1.0
    factor: float = 2.0


# --- disk cache ------------------------------------------------------------

def cache_key(model_name: str, text: str, params: dict[str, Any] | None = None) -> str:
    payload = json.dumps({"model": model_name, "input": text, "params": params or {}},
                         sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class DiskCache:
    """Content-addressed JSON records under ``root/<kk>/<key>.json``.

    Writes go to a temp file in the same directory and are renamed into
    place. There is no eviction.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str):
        path = self._path(key)
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)["value"]

    def __contains__(self, key: str) -> bool:
        return self._path(key).exists()

    def put(self, key: str, value) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        record = {"key": key, "value": value, "created_at": time.time()}
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record, fh)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


# --- embedding files -------------------------------------------------------

def load_embeddings_file(path, model_name: str | None = None) -> VectorSet:
    """Read ``{"id", "vector"}`` lines, with an optional ``{"model", "dim"}``
    header line. The dimension is fixed by the header or the first vector."""
    path = Path(path)
    ids: list[str] = []
    rows: list[list[float]] = []
    dim = None
    header_model = None
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise EmbeddingFileError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not ids and "vector" not in rec and ("model" in rec or "dim" in rec):
                header_model = rec.get("model")
                dim = rec.get("dim")
                continue
            if "id" not in rec or "vector" not in rec:
                raise EmbeddingFileError(f"{path}:{lineno}: record needs 'id' and 'vector'")
            vec = rec["vector"]
            if dim is None:
                dim = len(vec)
            if len(vec) != dim:
                raise EmbeddingFileError(
                    f"{path}:{lineno}: vector length {len(vec)} != {dim}")
            if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in vec):
                raise EmbeddingFileError(f"{path}:{lineno}: NaN, Inf or non-numeric entry")
            rid = str(rec["id"])
            if rid in seen:
                raise EmbeddingFileError(f"{path}:{lineno}: duplicate id {rid!r}")
            seen.add(rid)
            ids.append(rid)
            rows.append(vec)
    if not rows:
        raise EmbeddingFileError(f"{path}: no vectors")
    name = model_name or header_model or path.stem
    return VectorSet(np.array(rows, dtype=np.float64), ids, f"external:{name}")


def save_embeddings_file(vs: VectorSet, path, model_name: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    M = vs.dense()
    if model_name is None:
        model_name = vs.provenance.split(":", 1)[-1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"model": model_name, "dim": int(M.shape[1])}) + "\n")
        for rid, row in zip(vs.row_ids, M):
            fh.write(json.dumps({"id": rid, "vector": row.tolist()}) + "\n")
    return path


# --- HTTP plumbing ---------------------------------------------------------

class _RateLimiter:
    """Serialises requests per endpoint and spaces them ``min_interval`` apart."""

    _locks: dict[str, threading.Semaphore] = {}
    _last: dict[str, float] = {}
    _guard = threading.Lock()

    def __init__(self, endpoint: str, max_in_flight: int = 1, min_interval: float = 0.0):
        with self._guard:
            if endpoint not in self._locks:
                self._locks[endpoint] = threading.Semaphore(max_in_flight)
        self.endpoint = endpoint
        self.min_interval = min_interval

    def __enter__(self):
        self._locks[self.endpoint].acquire()
        if self.min_interval:
            wait = self._last.get(self.endpoint, 0.0) + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
        return self

    def __exit__(self, *exc):
        self._last[self.endpoint] = time.monotonic()
        self._locks[self.endpoint].release()


def _headers(api_key_env: str | None) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if api_key_env:
        key = os.environ.get(api_key_env)
        if key is None:
            raise EndpointConfigError(f"environment variable {api_key_env} is not set")
        headers["Authorization"] = f"Bearer {key}"
    return headers


def post_json(url: str, body: dict, headers: dict[str, str], timeout: float,
              retry: RetryPolicy = RetryPolicy(), session=None) -> dict:
    """POST with exponential backoff on 5xx, timeouts and connection errors."""
    http = session or requests
    last_error = None
    for attempt in range(retry.attempts):
        if attempt:
            time.sleep(retry.base_delay * retry.factor ** (attempt - 1))
        try:
            with _RateLimiter(url):
                resp = http.post(url, json=body, headers=headers, timeout=timeout)
        except (requests.Timeout, requests.ConnectionError) as exc:
            last_error = exc
            log.warning("%s: attempt %d failed: %s", url, attempt + 1, exc)
            continue
        if 400 <= resp.status_code < 500:
            raise EndpointConfigError(f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            log.warning("%s: attempt %d failed: %s", url, attempt + 1, last_error)
            continue
        return resp.json()
    raise EndpointUnavailable(f"{url} failed after {retry.attempts} attempts: {last_error}")


# --- embeddings over HTTP --------------------------------------------------

def embed_batch(texts: Sequence[str], source: EmbeddingSource, cache: DiskCache,
                retry: RetryPolicy = RetryPolicy(), session=None) -> list[list[float]]:
    """Embed ``texts`` in order, asking the endpoint only for uncached texts.

    Duplicate texts within a call are sent once.
    """
    if source.kind != "http":
        raise ValueError("embed_batch needs an http embedding source")
    if not texts:
        return []
    keys = [cache_key(source.model_name, t) for t in texts]
    results: dict[str, list[float]] = {}
    todo: list[tuple[str, str]] = []
    queued: set[str] = set()
    for key, text in zip(keys, texts):
        hit = cache.get(key)
        if hit is not None:
            results[key] = hit
        elif key not in queued:
            queued.add(key)
            todo.append((key, text))

    headers = _headers(source.api_key_env)
    for start in range(0, len(todo), source.batch_size):
        chunk = todo[start:start + source.batch_size]
        body = {"model": source.request_model, "input": [t for _, t in chunk]}
        reply = post_json(source.endpoint_url, body, headers, source.timeout, retry, session)
        data = reply.get("data")
        if not isinstance(data, list) or len(data) != len(chunk):
            raise EndpointUnavailable(
                f"{source.endpoint_url}: expected {len(chunk)} embeddings in reply")
        for item in data:
            key, _ = chunk[int(item["index"])]
            vec = [float(v) for v in item["embedding"]]
            cache.put(key, vec)
            results[key] = vec
    return [results[k] for k in keys]


def embed_corpus(documents: Sequence[Document], source: EmbeddingSource,
                 cache: DiskCache, retry: RetryPolicy = RetryPolicy(),
                 session=None) -> VectorSet:
    vecs = embed_batch([d.text for d in documents], source, cache, retry, session)
    dims = {len(v) for v in vecs}
    if len(dims) != 1:
        raise EmbeddingFileError(f"endpoint returned inconsistent dimensions {sorted(dims)}")
    return VectorSet(np.array(vecs, dtype=np.float64), [d.id for d in documents],
                     f"external:{source.model_name}")


# --- summarisation ---------------------------------------------------------

def truncate_tokens(text: str, limit: int) -> str:
    """Keep at most ``limit`` whitespace-separated tokens.

    Text already within the limit is returned untouched.
    """
    if limit <= 0:
        raise ValueError("limit must be > 0")
    tokens = text.split()
    if len(tokens) <= limit:
        return text
    return " ".join(tokens[:limit])


def build_prompt(text: str, cfg: SummariserConfig) -> str:
    return cfg.prompt_template.replace("{text}", truncate_tokens(text, cfg.max_input_tokens))


def _summary_request(prompt: str, cfg: SummariserConfig) -> dict:
    d = cfg.decode
    return {
        "model": cfg.model_id,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": d.temperature,
        "max_tokens": d.max_length,
        "top_k": d.top_k,
        "do_sample": d.do_sample,
        "n": d.num_return_sequences,
    }


def summarise(doc: Document, cfg: SummariserConfig, cache: DiskCache,
              retry: RetryPolicy = RetryPolicy(), session=None) -> Document:
    """Replace ``doc.text`` with an LLM summary; ids and labels are kept.

    When the endpoint stays unavailable the original text is kept and the
    document is flagged ``unsummarised``.
    """
    prompt = build_prompt(doc.text, cfg)
    key = cache_key(cfg.model_id, prompt, {"decode": asdict(cfg.decode)})
    summary = cache.get(key)
    if summary is None:
        try:
            reply = post_json(cfg.endpoint_url, _summary_request(prompt, cfg),
                              _headers(cfg.api_key_env), cfg.timeout, retry, session)
            summary = reply["choices"][0]["message"]["content"]
        except EndpointUnavailable as exc:
            log.warning("summary failed for %s: %s", doc.id, exc)
            return doc.with_flag(UNSUMMARISED)
        cache.put(key, summary)
    return replace(doc, text=summary)
