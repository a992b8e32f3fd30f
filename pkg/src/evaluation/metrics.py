# src/evaluation/metrics.py
"""
Binary-relevance ranking metrics over a run (query id -> ranked [(doc id, score)])
and qrels (query id -> set of relevant doc ids).

Queries without relevant documents are left out of every average; queries with
relevant documents but no entry in the run score 0.
"""
from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from src import config
from src.exceptions import EvaluationError

METRICS = ("ndcg", "mrr", "map", "precision", "recall", "r_cap")


def _discounts(n: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, n + 2))


def relevance_vector(ranked: Sequence, relevant: set, k: int) -> np.ndarray:
    """1/0 relevance of the first k ranked documents."""
    return np.asarray([1.0 if doc in relevant else 0.0 for doc, _ in ranked[:k]])


def dcg_at_k(rels: np.ndarray, k: int) -> float:
    rels = np.asarray(rels, dtype=np.float64)[:k]
    return float(np.sum(rels * _discounts(rels.size)))


def ndcg_for_query(ranked: Sequence, relevant: set, k: int) -> float:
    ideal = dcg_at_k(np.ones(min(len(relevant), k)), k)
    return dcg_at_k(relevance_vector(ranked, relevant, k), k) / ideal


def reciprocal_rank(ranked: Sequence, relevant: set, k: int) -> float:
    hits = np.flatnonzero(relevance_vector(ranked, relevant, k))
    return 1.0 / (hits[0] + 1) if hits.size else 0.0


def average_precision(ranked: Sequence, relevant: set, k: int) -> float:
    """Sum of precision at each relevant rank within k, divided by min(R, k)."""
    rels = relevance_vector(ranked, relevant, k)
    if not rels.any():
        return 0.0
    precisions = np.cumsum(rels) / np.arange(1, rels.size + 1)
    return float(np.sum(precisions * rels) / min(len(relevant), k))


def precision_at_k(ranked: Sequence, relevant: set, k: int) -> float:
    return float(relevance_vector(ranked, relevant, k).sum() / k)


def recall_at_k(ranked: Sequence, relevant: set, k: int) -> float:
    return float(relevance_vector(ranked, relevant, k).sum() / len(relevant))


def capped_recall_at_k(ranked: Sequence, relevant: set, k: int) -> float:
    return float(relevance_vector(ranked, relevant, k).sum() / min(len(relevant), k))


_PER_QUERY = {
    "ndcg": ndcg_for_query,
    "mrr": reciprocal_rank,
    "map": average_precision,
    "precision": precision_at_k,
    "recall": recall_at_k,
    "r_cap": capped_recall_at_k,
}


def _judged_queries(qrels: dict) -> list:
    if not qrels:
        raise EvaluationError("qrels are empty")
    judged = sorted(q for q, docs in qrels.items() if docs)
    if not judged:
        raise EvaluationError("no query in the qrels has a relevant document")
    return judged


def validate_run(run: dict) -> None:
    for query_id, ranked in run.items():
        docs = [doc for doc, _ in ranked]
        if len(set(docs)) != len(docs):
            raise EvaluationError(f"run for query '{query_id}' lists a document twice")
        scores = np.asarray([score for _, score in ranked], dtype=np.float64)
        if scores.size > 1 and np.any(np.diff(scores) > 0):
            raise EvaluationError(f"run for query '{query_id}' is not sorted by descending score")


def mean_metric(metric: str, run: dict, qrels: dict, k: int) -> float:
    if k < 1:
        raise EvaluationError(f"cutoff k must be at least 1, got {k}")
    fn = _PER_QUERY[metric]
    judged = _judged_queries(qrels)
    return float(np.mean([fn(run.get(q, []), qrels[q], k) for q in judged]))


def ndcg_at_k(run: dict, qrels: dict, k: int = config.NDCG_CUTOFF) -> float:
    return mean_metric("ndcg", run, qrels, k)


def retrieval_suite(run: dict, qrels: dict, ks: Iterable[int] = config.RETRIEVAL_CUTOFFS,
                    metrics: Sequence[str] = METRICS) -> pd.DataFrame:
    """Long table with columns metric, k, value."""
    validate_run(run)
    rows = [(metric, k, mean_metric(metric, run, qrels, k)) for metric in metrics for k in ks]
    return pd.DataFrame(rows, columns=["metric", "k", "value"])


def rank_documents(query_emb: np.ndarray, doc_emb: np.ndarray, query_ids: Sequence[str],
                   doc_ids: Sequence[str], top_k: Optional[int] = None) -> dict:
    """
    Cosine-similarity run. Ties keep the input document order.
    """
    q = np.asarray(query_emb, dtype=np.float64)
    d = np.asarray(doc_emb, dtype=np.float64)
    q_norm = np.linalg.norm(q, axis=1, keepdims=True)
    d_norm = np.linalg.norm(d, axis=1, keepdims=True)
    if np.any(q_norm == 0) or np.any(d_norm == 0):
        raise EvaluationError("cannot rank with a zero embedding")
    scores = (q / q_norm) @ (d / d_norm).T
    top_k = top_k or len(doc_ids)
    run = {}
    for row, query_id in enumerate(query_ids):
        order = np.argsort(-scores[row], kind="stable")[:top_k]
        run[query_id] = [(doc_ids[j], float(scores[row, j])) for j in order]
    return run


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise EvaluationError(f"spearman needs two equal-length lists, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise EvaluationError("spearman needs at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise EvaluationError("spearman is undefined for a constant input")
    return float(spearmanr(x, y)[0])
