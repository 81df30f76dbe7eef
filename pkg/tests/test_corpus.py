import datetime as dt
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from xlir.corpus import (
    DEFAULT_TOKENIZER,
    Document,
    Tokenizer,
    Topic,
    form_query,
    ingest_collection,
    ingest_topics,
    parse_date,
    parse_passage_key,
    passage_key,
    split_passages,
    split_spans,
    write_collection,
)
from xlir.errors import FormatError, ValidationError


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


class TestIngestion:
    def test_three_documents(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        write_jsonl(
            path,
            [
                {"id": f"d{i}", "title": f"t{i}", "text": "body", "lang": "eng"}
                for i in range(1, 4)
            ],
        )
        docs = ingest_collection(path)
        assert [d.doc_id for d in docs] == ["d1", "d2", "d3"]

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        write_jsonl(
            path,
            [
                {"id": "d1", "title": "a", "text": "x", "lang": "eng"},
                {"id": "d1", "title": "b", "text": "y", "lang": "eng"},
            ],
        )
        with pytest.raises(ValidationError, match="d1"):
            ingest_collection(path)

    def test_date_passthrough(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        write_jsonl(path, [{"id": "d1", "title": "a", "text": "x", "lang": "eng", "date": "2021-03-25"}])
        (doc,) = ingest_collection(path)
        assert doc.date == dt.date(2021, 3, 25)

    def test_undeclared_language_rejected(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        write_jsonl(path, [{"id": "d1", "title": "a", "text": "x", "lang": "deu"}])
        with pytest.raises(ValidationError, match="deu"):
            ingest_collection(path, languages=("fas", "rus", "zho"))
        assert ingest_collection(path)  # unconstrained ingestion accepts it

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        path.write_text('{"id": "d1", "title": "a", "text": "x", "lang": "eng"}\nnot json\n')
        with pytest.raises(FormatError, match=":2"):
            ingest_collection(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        write_jsonl(path, [{"id": "d1", "title": "a", "lang": "eng"}])
        with pytest.raises(FormatError, match="text"):
            ingest_collection(path)

    def test_collection_round_trip(self, tmp_path):
        docs = [
            Document("d1", "Title", "Body text", "fas", dt.date(2020, 5, 1)),
            Document("d2", "Other", "More", "rus", None),
        ]
        path = tmp_path / "docs.jsonl"
        write_collection(path, docs)
        assert ingest_collection(path) == docs

    def test_topic_ingestion_and_date_order(self, tmp_path):
        path = tmp_path / "topics.jsonl"
        write_jsonl(
            path,
            [
                {
                    "topic_id": "203",
                    "title": "a",
                    "description": "b",
                    "start_date": "2021-03-23",
                    "end_date": "2021-03-29",
                }
            ],
        )
        (topic,) = ingest_topics(path)
        assert topic.start_date == dt.date(2021, 3, 23)
        with pytest.raises(ValidationError):
            Topic("x", "t", "d", dt.date(2021, 1, 2), dt.date(2021, 1, 1))


class TestParseDate:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("2021-03-25", dt.date(2021, 3, 25)),
            ("2018-12", dt.date(2018, 12, 1)),
            ("3/23/2021", dt.date(2021, 3, 23)),
            ("12/2018", dt.date(2018, 12, 1)),
        ],
    )
    def test_formats(self, text, expected):
        assert parse_date(text) == expected

    def test_rejects_garbage(self):
        with pytest.raises(FormatError):
            parse_date("yesterday")
        with pytest.raises(FormatError):
            parse_date("2021-13-01")


class TestTokenizer:
    def test_lowercase_and_split(self):
        assert DEFAULT_TOKENIZER("Hello, World! 42") == ["hello", "world", "42"]

    def test_nfkc_normalization(self):
        # Fullwidth letters normalize to ASCII.
        assert DEFAULT_TOKENIZER("Ｈｅllo") == ["hello"]

    def test_stemmer_hook(self):
        tok = Tokenizer(stemmer=lambda t: t[:3])
        assert tok("testing tokens") == ["tes", "tok"]

    @given(st.text(max_size=200))
    def test_deterministic(self, text):
        assert DEFAULT_TOKENIZER(text) == DEFAULT_TOKENIZER(text)


def doc_of_length(n):
    return Document("d", "", " ".join(f"w{i}" for i in range(n)), "eng")


class TestSplitPassages:
    def test_short_doc_single_passage(self):
        passages = split_passages(doc_of_length(100))
        assert [(p.start, p.end) for p in passages] == [(0, 100)]

    def test_270_tokens(self):
        # Window starts enumerate 0, 90; the window at 90 ends at 270 = doc
        # length, so emission stops there.
        passages = split_passages(doc_of_length(270))
        assert [(p.start, p.end) for p in passages] == [(0, 180), (90, 270)]

    def test_450_tokens(self):
        passages = split_passages(doc_of_length(450))
        assert [p.start for p in passages] == [0, 90, 180, 270]
        assert passages[-1].end == 450

    def test_empty_doc_yields_nothing(self):
        assert split_passages(doc_of_length(0)) == []

    def test_invalid_params(self):
        with pytest.raises(ValidationError):
            split_spans(10, max_len=0)
        with pytest.raises(ValidationError):
            split_spans(10, max_len=5, stride=6)

    @given(
        st.integers(min_value=1, max_value=2000),
        st.integers(min_value=1, max_value=300),
        st.integers(min_value=1, max_value=300),
    )
    def test_count_formula_and_coverage(self, length, max_len, stride):
        if stride > max_len:
            stride = max_len
        spans = split_spans(length, max_len, stride)
        if length > max_len:
            assert len(spans) == 1 + math.ceil((length - max_len) / stride)
        else:
            assert len(spans) == 1
        covered = set()
        for start, end in spans:
            assert 0 <= start < end <= length
            assert end - start <= max_len
            covered.update(range(start, end))
        assert covered == set(range(length))
        for (a_start, _), (b_start, _) in zip(spans, spans[1:]):
            assert b_start - a_start == stride


class TestFormQuery:
    topic = Topic("1", "a b", "c", None, None)

    def test_td_concatenation(self):
        assert form_query(self.topic, "TD") == "a b c"

    def test_title_only(self):
        assert form_query(self.topic, "T") == "a b"

    def test_empty_field_rejected(self):
        with pytest.raises(ValidationError):
            form_query(Topic("1", "", "c"), "T")

    def test_unknown_variant(self):
        with pytest.raises(ValidationError):
            form_query(self.topic, "X")


def test_passage_key_round_trip():
    assert parse_passage_key(passage_key("doc#1", 3)) == ("doc#1", 3)
    with pytest.raises(FormatError):
        parse_passage_key("nokey")
    with pytest.raises(FormatError):
        parse_passage_key("doc#notanumber")
