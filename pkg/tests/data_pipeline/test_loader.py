# tests/data_pipeline/test_loader.py
import json

import pytest

from src.data_pipeline.io_utils import atomic_write
from src.data_pipeline.loader import load_jsonl, load_qrels, load_run, write_run
from src.data_pipeline.schemas import CorpusRecord, PairRecord, TripletRecord
from src.exceptions import DataError


def _write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def test_loads_and_validates_records(tmp_path):
    path = _write_lines(tmp_path / "pairs.jsonl", [
        json.dumps({"query": "q1", "target": "t1", "source": "alpha"}),
        "",
        json.dumps({"query": "q2", "target": "t2"}),
    ])
    records = load_jsonl(path, PairRecord)
    assert [r.query for r in records] == ["q1", "q2"]
    assert records[1].source == "default"


def test_malformed_line_is_reported_with_its_number(tmp_path):
    lines = [json.dumps({"id": str(i), "text": "the cat"}) for i in range(6)] + ['{"id": "6", "text": ']
    with pytest.raises(DataError, match="line 7"):
        load_jsonl(_write_lines(tmp_path / "corpus.jsonl", lines), CorpusRecord)


def test_schema_mismatch_names_the_record(tmp_path):
    path = _write_lines(tmp_path / "corpus.jsonl", [json.dumps({"query": "q", "target": "t"})])
    with pytest.raises(DataError, match="line 1 is not a valid CorpusRecord"):
        load_jsonl(path, CorpusRecord)


def test_triplets_need_fifteen_negatives(tmp_path):
    record = {"query": "q", "positive": "p", "negatives": ["n"] * 14}
    with pytest.raises(DataError, match="TripletRecord"):
        load_jsonl(_write_lines(tmp_path / "triplets.jsonl", [json.dumps(record)]), TripletRecord)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_jsonl(str(tmp_path / "absent.jsonl"), CorpusRecord)


def test_qrels_keep_positive_judgements_only(tmp_path):
    path = _write_lines(tmp_path / "qrels.tsv", ["q1\td1\t1", "q1\td2\t0", "q2\td3\t2", "q3\td4\t0"])
    assert load_qrels(path) == {"q1": {"d1"}, "q2": {"d3"}}


def test_empty_or_missing_qrels(tmp_path):
    empty = tmp_path / "empty.tsv"
    empty.write_text("")
    assert load_qrels(str(empty)) == {}
    with pytest.raises(DataError, match="not found"):
        load_qrels(str(tmp_path / "absent.tsv"))


def test_run_file_preserves_rank_order(tmp_path):
    run = {"q1": [("d2", 0.9), ("d1", 0.5)], "q2": [("d1", 0.3)]}
    path = str(tmp_path / "run.tsv")
    write_run(run, path)
    assert load_run(path) == run


@pytest.mark.parametrize("lines", [[""], ["q1\td1"]])
def test_empty_or_short_run_lines_are_data_errors(tmp_path, lines):
    with pytest.raises(DataError):
        load_run(_write_lines(tmp_path / "run.tsv", lines))


def test_atomic_write_leaves_existing_file_on_failure(tmp_path):
    path = tmp_path / "checkpoint.bin"
    path.write_bytes(b"original")
    with pytest.raises(RuntimeError):
        with atomic_write(str(path), "wb") as f:
            f.write(b"partial")
            raise RuntimeError("interrupted")
    assert path.read_bytes() == b"original"
    assert [p.name for p in tmp_path.iterdir()] == ["checkpoint.bin"]
