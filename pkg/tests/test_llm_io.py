import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textclust.corpus import Document
from textclust.llm_io import (PROMPT_TEMPLATE, UNSUMMARISED, DecodeParams, DiskCache,
                              EmbeddingFileError, EmbeddingSource, EndpointConfigError,
                              EndpointUnavailable, RetryPolicy, SummariserConfig,
                              build_prompt, cache_key, embed_batch, embed_corpus,
                              load_embeddings_file, save_embeddings_file, summarise,
                              truncate_tokens)
from textclust.vectorize import VectorSet

from conftest import StubEndpoint

FAST = RetryPolicy(attempts=3, base_delay=0.0)


def _source(stub, **kw):
    return EmbeddingSource(kind="http", model_name="stub-embed",
                           endpoint_url=stub.url + "/v1/embeddings", **kw)


def _summariser(stub, **kw):
    return SummariserConfig(endpoint_url=stub.url + "/v1/chat/completions",
                            model_id="stub-chat", max_input_tokens=kw.pop("max_input_tokens", 4096), **kw)


# --- embedding files ---------------------------------------------------------

def _write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def test_load_file_with_299_rows_of_dim_768(tmp_path):
    rng = np.random.default_rng(0)
    recs = [{"model": "bert", "dim": 768}] + [
        {"id": f"d{i}", "vector": rng.standard_normal(768).tolist()} for i in range(299)]
    vs = load_embeddings_file(_write_lines(tmp_path / "e.jsonl", recs))
    assert (len(vs), vs.dimension) == (299, 768)
    assert vs.provenance == "external:bert"
    assert vs.row_ids[:2] == ["d0", "d1"]


def test_empty_file_has_no_vectors(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text("")
    with pytest.raises(EmbeddingFileError, match="no vectors"):
        load_embeddings_file(path)


def test_inconsistent_lengths_are_fatal(tmp_path):
    path = _write_lines(tmp_path / "e.jsonl", [{"id": "a", "vector": [1, 2, 3]},
                                               {"id": "b", "vector": [1, 2, 3, 4]}])
    with pytest.raises(EmbeddingFileError, match="length"):
        load_embeddings_file(path)


def test_nan_entry_is_fatal(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text('{"id": "a", "vector": [1.0, NaN]}\n')
    with pytest.raises(EmbeddingFileError):
        load_embeddings_file(path)


def test_embedding_file_round_trip(tmp_path):
    vs = VectorSet(np.array([[0.1, 1e-17], [3.0, -2.5]]), ["x", "y"], "external:m")
    again = load_embeddings_file(save_embeddings_file(vs, tmp_path / "out.jsonl"))
    assert again.row_ids == vs.row_ids
    assert np.array_equal(again.dense(), vs.dense())
    assert again.provenance == "external:m"


# --- embeddings over HTTP ----------------------------------------------------

def test_empty_batch_makes_no_request(stub_endpoint, tmp_path):
    assert embed_batch([], _source(stub_endpoint), DiskCache(tmp_path)) == []
    assert stub_endpoint.requests == []


def test_batch_of_three_returns_stub_vectors_in_order(stub_endpoint, tmp_path):
    fixed = {"alpha": [1.0, 0.0], "beta": [0.0, 1.0], "gamma": [0.5, 0.5]}
    stub_endpoint.embedder = lambda t: fixed[t]
    out = embed_batch(["gamma", "alpha", "beta"], _source(stub_endpoint), DiskCache(tmp_path))
    assert out == [fixed["gamma"], fixed["alpha"], fixed["beta"]]
    assert len(stub_endpoint.requests) == 1
    assert stub_endpoint.requests[0]["body"]["model"] == "stub-embed"


def test_identical_texts_hit_the_cache(stub_endpoint, tmp_path):
    cache = DiskCache(tmp_path)
    src = _source(stub_endpoint)
    first = embed_batch(["same"], src, cache)
    n = len(stub_endpoint.requests)
    second = embed_batch(["same", "same"], src, cache)
    assert len(stub_endpoint.requests) == n
    assert second == [first[0], first[0]]


def test_duplicates_within_a_call_are_sent_once(stub_endpoint, tmp_path):
    out = embed_batch(["a", "a", "b"], _source(stub_endpoint), DiskCache(tmp_path))
    assert stub_endpoint.requests[0]["body"]["input"] == ["a", "b"]
    assert out[0] == out[1]


def test_batches_respect_batch_size(stub_endpoint, tmp_path):
    texts = [f"t{i}" for i in range(7)]
    embed_batch(texts, _source(stub_endpoint, batch_size=3), DiskCache(tmp_path))
    assert [len(r["body"]["input"]) for r in stub_endpoint.requests] == [3, 3, 1]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.text(alphabet="abcdef", min_size=1, max_size=5), min_size=1, max_size=20),
       st.integers(1, 6))
def test_order_is_preserved(tmp_path_factory, texts, batch_size):
    stub = StubEndpoint().start()
    try:
        stub.embedder = lambda t: [float(ord(c)) for c in t.ljust(5, "z")]
        out = embed_batch(texts, _source(stub, batch_size=batch_size),
                          DiskCache(tmp_path_factory.mktemp("c")))
        assert out == [[float(ord(c)) for c in t.ljust(5, "z")] for t in texts]
    finally:
        stub.stop()


def test_transient_5xx_is_retried(stub_endpoint, tmp_path):
    stub_endpoint.fail_first = 2
    out = embed_batch(["x"], _source(stub_endpoint), DiskCache(tmp_path), FAST)
    assert len(out) == 1
    assert len(stub_endpoint.requests) == 3


def test_persistent_5xx_raises_unavailable(stub_endpoint, tmp_path):
    stub_endpoint.fail_first = 10
    with pytest.raises(EndpointUnavailable):
        embed_batch(["x"], _source(stub_endpoint), DiskCache(tmp_path), FAST)
    assert len(stub_endpoint.requests) == 3


def test_4xx_is_a_fatal_config_error(stub_endpoint, tmp_path):
    stub_endpoint.fail_first = 10
    stub_endpoint.fail_status = 401
    with pytest.raises(EndpointConfigError):
        embed_batch(["x"], _source(stub_endpoint), DiskCache(tmp_path), FAST)
    assert len(stub_endpoint.requests) == 1


def test_api_key_read_from_named_env_var(stub_endpoint, tmp_path, monkeypatch):
    monkeypatch.setenv("STUB_KEY", "sekrit")
    embed_batch(["x"], _source(stub_endpoint, api_key_env="STUB_KEY"), DiskCache(tmp_path))
    assert stub_endpoint.requests[0]["auth"] == "Bearer sekrit"
    monkeypatch.delenv("STUB_KEY")
    with pytest.raises(EndpointConfigError):
        embed_batch(["y"], _source(stub_endpoint, api_key_env="STUB_KEY"), DiskCache(tmp_path))


def test_embed_corpus_builds_aligned_vector_set(stub_endpoint, tmp_path):
    docs = [Document("a", "one", "x"), Document("b", "three", "y")]
    vs = embed_corpus(docs, _source(stub_endpoint), DiskCache(tmp_path))
    assert vs.row_ids == ["a", "b"]
    assert vs.dense()[:, 0].tolist() == [3.0, 5.0]


def test_cache_key_is_stable_and_sensitive():
    k = cache_key("m", "text", {"t": 0})
    assert k == cache_key("m", "text", {"t": 0})
    assert len({k, cache_key("m2", "text", {"t": 0}), cache_key("m", "text!", {"t": 0}),
                cache_key("m", "text", {"t": 1})}) == 4


def test_disk_cache_returns_bit_identical_values(tmp_path):
    cache = DiskCache(tmp_path)
    vec = [0.1, 1 / 3, -2.5e-300]
    cache.put("ab" * 32, vec)
    assert DiskCache(tmp_path).get("ab" * 32) == vec
    assert list(tmp_path.rglob("*.tmp")) == []


# --- summarisation -----------------------------------------------------------

def test_summary_passthrough_keeps_id_and_labels(stub_endpoint, tmp_path):
    doc = Document("d1", "some long abstract text", "ai", "ml")
    out = summarise(doc, _summariser(stub_endpoint), DiskCache(tmp_path))
    assert (out.id, out.text, out.label, out.label2) == ("d1", "S.", "ai", "ml")


def test_prompt_uses_template_verbatim(stub_endpoint, tmp_path):
    summarise(Document("d", "hello there", "x"), _summariser(stub_endpoint), DiskCache(tmp_path))
    body = stub_endpoint.requests[0]["body"]
    assert body["messages"] == [{"role": "user", "content": (
        "Write a concise summary of the text. Return your responses with maximum 5 "
        "sentences that cover the key points of the text.\nhello there\nSUMMARY:")}]
    assert body["model"] == "stub-chat"
    assert (body["temperature"], body["max_tokens"]) == (0.0, 800)


def test_long_text_truncated_before_substitution(stub_endpoint, tmp_path):
    words = [f"w{i}" for i in range(10_000)]
    cfg = _summariser(stub_endpoint, max_input_tokens=4096)
    summarise(Document("d", " ".join(words), "x"), cfg, DiskCache(tmp_path))
    prompt = stub_endpoint.requests[0]["body"]["messages"][0]["content"]
    body = prompt.split("\n")[1]
    assert body.split() == words[:4096]


def test_same_doc_twice_makes_one_call(stub_endpoint, tmp_path):
    cache = DiskCache(tmp_path)
    doc = Document("d", "text", "x")
    a = summarise(doc, _summariser(stub_endpoint), cache)
    b = summarise(doc, _summariser(stub_endpoint), cache)
    assert a == b
    assert len(stub_endpoint.requests) == 1


def test_endpoint_failure_falls_back_to_original(stub_endpoint, tmp_path):
    stub_endpoint.fail_first = 10
    doc = Document("d", "original", "x")
    out = summarise(doc, _summariser(stub_endpoint), DiskCache(tmp_path), FAST)
    assert out.text == "original"
    assert UNSUMMARISED in out.flags
    assert out.id == doc.id and out.label == doc.label


@pytest.mark.parametrize("text, limit, expected", [
    ("a b c", 10, "a b c"),
    (" ".join(str(i) for i in range(12)), 5, "0 1 2 3 4"),
    ("x  y\tz", 3, "x  y\tz"),
])
def test_truncate_tokens(text, limit, expected):
    assert truncate_tokens(text, limit) == expected


def test_template_must_have_one_placeholder(stub_endpoint):
    with pytest.raises(ValueError):
        _summariser(stub_endpoint, prompt_template="no placeholder")
    assert build_prompt("t", _summariser(stub_endpoint)) == PROMPT_TEMPLATE.replace("{text}", "t")


def test_contradictory_decode_params_are_noted_not_changed():
    d = DecodeParams(temperature=0.0, do_sample=True, top_k=10)
    assert d.warnings()
    assert DecodeParams(temperature=0.7).warnings() == []
