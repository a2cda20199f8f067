import json
import string
import sys
import unicodedata

import pytest
from fontTools import unicodedata as ft_unicodedata
from hypothesis import given, settings
from hypothesis import strategies as st

from textclust.corpus import (EMPTY_AFTER_PREPROCESSING, Corpus, CorpusError, Document,
                              RecordError, clean_text, is_allowed_char, load_corpus,
                              preprocess, save_corpus)

from conftest import synthetic_records, write_jsonl


def oracle_allowed(ch: str) -> bool:
    """Character-class reference built from an independent script table."""
    if ch.isspace() or ch in string.punctuation or ch in "0123456789":
        return True
    if 0x300 <= ord(ch) <= 0x36F:
        return True
    return unicodedata.category(ch).startswith("L") and ft_unicodedata.script(ch) == "Latn"


def test_char_filter_matches_script_oracle_on_every_assigned_codepoint():
    mismatches = []
    for cp in range(sys.maxunicode + 1):
        ch = chr(cp)
        if unicodedata.category(ch) in ("Cn", "Cs"):
            continue
        if is_allowed_char(ch) != oracle_allowed(ch):
            mismatches.append(hex(cp))
    assert mismatches == []


def test_oracle_classifies_the_mixed_script_example():
    kept = "".join(ch for ch in "café №5 Привет" if oracle_allowed(ch))
    assert " ".join(kept.split()) == "café 5"


@pytest.mark.parametrize("raw, expected", [
    ("<p>Hello  world</p>", "Hello world"),
    ("contact me at a.b@x.com today", "contact me at today"),
    ("café №5 Привет", "café 5"),
    ("<div class='x'>a</div><br/>b", "a b"),
    ("<!-- note --> kept", "kept"),
    ("x < y and y > z", "x < y and y > z"),
    ("  \t\n ", ""),
])
def test_clean_text_examples(raw, expected):
    assert clean_text(raw) == expected


def test_preprocess_flags_empty_result_and_keeps_document():
    doc = preprocess(Document("a", "Привет <b></b>", "x"))
    assert doc.text == ""
    assert EMPTY_AFTER_PREPROCESSING in doc.flags
    assert (doc.id, doc.label) == ("a", "x")


def test_preprocess_does_not_lowercase():
    assert clean_text("Hello World") == "Hello World"


text_strategy = st.lists(
    st.one_of(
        st.characters(),
        st.sampled_from(list("<>/@. abc\t\n-_éЖ№") + ["<p>", "</b>", "a@b.com", "\u0301"]),
    ),
    max_size=40,
).map("".join)


@settings(max_examples=400, deadline=None)
@given(text_strategy)
def test_preprocess_is_idempotent(text):
    once = clean_text(text)
    assert clean_text(once) == once


@settings(max_examples=300, deadline=None)
@given(text_strategy)
def test_preprocess_output_stays_in_allowed_class(text):
    assert all(oracle_allowed(ch) for ch in clean_text(text))


def test_load_jsonl_keeps_order_and_counts_classes(tmp_path):
    recs = synthetic_records(n_per_class=5)
    path = write_jsonl(tmp_path / "c.jsonl", recs)
    corpus = load_corpus(path)
    assert corpus.ids == [r["id"] for r in recs]
    assert len(corpus) == 20
    assert corpus.class_count() == 4


def test_load_cstr_sized_corpus(tmp_path):
    # same shape as the CSTR abstracts: 299 documents over 4 classes
    recs = synthetic_records(n_per_class=75)[:299]
    corpus = load_corpus(write_jsonl(tmp_path / "cstr.jsonl", recs))
    assert len(corpus) == 299
    assert corpus.class_count() == 4


def test_empty_file_is_an_error(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(CorpusError, match="empty corpus"):
        load_corpus(path)


def test_duplicate_id_is_fatal(tmp_path):
    path = write_jsonl(tmp_path / "d.jsonl", [
        {"id": "a", "text": "x", "label": "1"},
        {"id": "a", "text": "y", "label": "2"},
    ])
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(path)
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(path, strict=False)


def test_missing_field_reports_line_number(tmp_path):
    path = write_jsonl(tmp_path / "m.jsonl", [
        {"id": "a", "text": "x", "label": "1"},
        {"id": "b", "text": "y"},
    ])
    with pytest.raises(RecordError) as info:
        load_corpus(path)
    assert info.value.line == 2
    assert "label" in str(info.value)


def test_non_strict_load_collects_rejected_records(tmp_path):
    path = write_jsonl(tmp_path / "m.jsonl", [
        {"id": "a", "text": "x", "label": "1"},
        {"id": "b", "label": "2"},
        {"id": "c", "text": "z", "label": "2"},
    ])
    corpus = load_corpus(path, strict=False)
    assert corpus.ids == ["a", "c"]
    assert [line for line, _ in corpus.rejected] == [2]


def test_csv_with_two_label_levels(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text('id,text,label,label2\n1,"hello, world",news,sport\n2,foo,news,politics\n'
                    '3,bar,arts,music\n', encoding="utf-8")
    corpus = load_corpus(path)
    assert corpus.texts[0] == "hello, world"
    assert corpus.class_counts == {1: 2, 2: 3}


def test_level_two_labels_required_when_requested():
    corpus = Corpus("c", [Document("a", "t", "x")])
    with pytest.raises(CorpusError):
        corpus.labels(2)


@pytest.mark.parametrize("fmt", ["jsonl", "csv"])
def test_save_load_round_trip(tmp_path, fmt):
    docs = [
        Document("1", "naïve café, \"quoted\"\nnewline", "a", "x"),
        Document("2", "emoji 😀 and tab\t", "b", "y"),
        Document("3", "", "a", "z"),
    ]
    corpus = Corpus("rt", docs)
    path = save_corpus(corpus, tmp_path / f"rt.{fmt}")
    again = load_corpus(path)
    assert again.documents == corpus.documents
    assert again.content_hash() == corpus.content_hash()


def test_jsonl_round_trip_is_byte_identical(tmp_path):
    recs = synthetic_records(n_per_class=3)
    src = tmp_path / "a.jsonl"
    src.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in recs), encoding="utf-8")
    out = save_corpus(load_corpus(src), tmp_path / "b.jsonl")
    assert out.read_bytes() == src.read_bytes()
