# src/data_pipeline/loader.py

import json
import os
from typing import Type, TypeVar

import pandas as pd
from pydantic import BaseModel

from src.exceptions import DataError
from src.logger import logger
from .io_utils import write_csv
from .schemas import ValidationError

RecordT = TypeVar("RecordT", bound=BaseModel)


def load_jsonl(path: str, schema: Type[RecordT]) -> list[RecordT]:
    """
    Loads and validates a JSON-lines file, one record per line.

    Blank lines are skipped. A malformed line or a record that fails validation
    stops the load with a DataError naming the line number.
    """
    logger.info(f"Loading {schema.__name__} records from {path}")
    if not os.path.exists(path):
        logger.error(f"File not found: {path}")
        raise DataError(f"File not found: {path}")

    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as e:
                logger.error(f"Malformed JSON on line {line_number} of {path}: {e}")
                raise DataError(f"{path}: malformed JSON on line {line_number}: {e.msg}") from e
            try:
                records.append(schema.model_validate(payload))
            except ValidationError as e:
                logger.error(f"Invalid {schema.__name__} on line {line_number} of {path}: {e}")
                raise DataError(
                    f"{path}: line {line_number} is not a valid {schema.__name__} record: {payload!r}"
                ) from e

    logger.info(f"Data loading complete. Valid records: {len(records)}")
    return records


def load_qrels(path: str) -> dict:
    """Reads `query_id doc_id relevance` lines into query id -> set of relevant doc ids."""
    if not os.path.exists(path):
        raise DataError(f"Qrels file not found: {path}")
    try:
        frame = pd.read_csv(path, sep="\t", header=None, names=["query_id", "doc_id", "relevance"],
                            dtype={"query_id": str, "doc_id": str})
    except pd.errors.EmptyDataError:
        logger.warning(f"⚠️ Qrels file {path} is empty.")
        return {}
    except pd.errors.ParserError as e:
        raise DataError(f"Error parsing qrels file {path}: {e}") from e
    qrels = {}
    for row in frame.itertuples(index=False):
        if row.relevance > 0:
            qrels.setdefault(row.query_id, set()).add(row.doc_id)
    logger.info(f"Loaded qrels for {len(qrels)} queries from {path}")
    return qrels


def load_run(path: str) -> dict:
    """Reads `query_id doc_id rank score` lines into query id -> [(doc_id, score), ...] by rank."""
    if not os.path.exists(path):
        raise DataError(f"Run file not found: {path}")
    try:
        frame = pd.read_csv(path, sep="\t", header=None, names=["query_id", "doc_id", "rank", "score"],
                            dtype={"query_id": str, "doc_id": str})
    except pd.errors.EmptyDataError:
        raise DataError(f"Run file {path} is empty")
    except pd.errors.ParserError as e:
        raise DataError(f"Error parsing run file {path}: {e}") from e
    if frame[["rank", "score"]].isna().any().any():
        raise DataError(f"{path}: every run line needs query_id, doc_id, rank and score")
    run = {}
    for query_id, group in frame.sort_values(["query_id", "rank"]).groupby("query_id", sort=False):
        run[query_id] = list(zip(group["doc_id"], group["score"].astype(float)))
    logger.info(f"Loaded run with {len(run)} queries from {path}")
    return run


def write_run(run: dict, path: str) -> None:
    rows = [
        (query_id, doc_id, rank, score)
        for query_id, ranked in run.items()
        for rank, (doc_id, score) in enumerate(ranked, start=1)
    ]
    frame = pd.DataFrame(rows, columns=["query_id", "doc_id", "rank", "score"])
    write_csv(frame, path, sep="\t", header=False, index=False)
    logger.info(f"Saved run with {len(run)} queries to {path}")
