# src/evaluation/tasks.py
"""
Evaluation tasks. Each task holds its data and exposes
`evaluate(state, vocab, max_len) -> {metric name: value}`, so any of them can be
re-run at several truncation lengths.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import accuracy_score, average_precision_score

from src import config
from src.data_pipeline.loader import write_run
from src.data_pipeline.schemas import CorpusRecord, LabeledTextRecord
from src.data_pipeline.tokenizer import Vocabulary
from src.exceptions import EvaluationError
from src.logger import logger
from src.model.embedder import encode
from src.model.encoder import EncoderState
from src.model.mlm import mlm_accuracy
from .clustering import ClusteringTask, evaluate_clustering
from .metrics import average_precision, rank_documents, retrieval_suite, spearman

RUN_NAME = "run_{length}.tsv"


def _matrix(state: EncoderState, texts: Sequence[str], vocab: Vocabulary, max_len: int) -> np.ndarray:
    return np.stack([v.values for v in encode(state, list(texts), vocab, max_len)]).astype(np.float64)


def _row_cosines(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    if np.any(norms == 0):
        raise EvaluationError("cosine similarity is undefined for a zero embedding")
    return (a * b).sum(axis=1) / norms


@dataclass
class MlmTask:
    corpus: list
    seed: int = config.EVAL_SEED
    name: str = "mlm"

    def evaluate(self, state: EncoderState, vocab: Vocabulary, max_len: int) -> dict:
        texts = [r.text if isinstance(r, CorpusRecord) else r for r in self.corpus]
        return {"mlm_accuracy": mlm_accuracy(state, texts, vocab, max_len, seed=self.seed)}


@dataclass
class RetrievalTask:
    corpus: list  # CorpusRecord
    queries: list  # QueryRecord
    qrels: dict
    ks: tuple = config.RETRIEVAL_CUTOFFS
    run_dir: Optional[str] = None  # when set, each length's ranking is saved as a run file
    name: str = "retrieval"

    def __post_init__(self):
        if not self.qrels:
            raise EvaluationError("retrieval needs qrels")
        known = {q.id for q in self.queries}
        missing = sorted(set(self.qrels) - known)
        if missing:
            raise EvaluationError(f"qrels reference unknown queries: {missing[:5]}")

    def run(self, state: EncoderState, vocab: Vocabulary, max_len: int) -> dict:
        doc_emb = _matrix(state, [d.text for d in self.corpus], vocab, max_len)
        query_emb = _matrix(state, [q.text for q in self.queries], vocab, max_len)
        return rank_documents(query_emb, doc_emb, [q.id for q in self.queries], [d.id for d in self.corpus],
                              top_k=max(self.ks))

    def evaluate(self, state: EncoderState, vocab: Vocabulary, max_len: int) -> dict:
        run = self.run(state, vocab, max_len)
        if self.run_dir is not None:
            write_run(run, run_path(self.run_dir, max_len))
        return score_run(run, self.qrels, self.ks)


def run_path(run_dir: str, max_len: int) -> str:
    return os.path.join(run_dir, RUN_NAME.format(length=max_len))


def score_run(run: dict, qrels: dict, ks: Sequence[int] = config.RETRIEVAL_CUTOFFS) -> dict:
    table = retrieval_suite(run, qrels, ks)
    return {f"{row.metric}@{row.k}": row.value for row in table.itertuples()}


@dataclass
class ClusterTask:
    items: list  # LabeledTextRecord
    batch_size: int = config.KMEANS_BATCH_SIZE
    seed: int = 0
    name: str = "cluster"

    def evaluate(self, state: EncoderState, vocab: Vocabulary, max_len: int) -> dict:
        embeddings = _matrix(state, [r.text for r in self.items], vocab, max_len)
        task = ClusteringTask(embeddings, [r.label for r in self.items])
        return {"v_measure": evaluate_clustering(task, batch_size=self.batch_size, seed=self.seed)}


@dataclass
class StsTask:
    pairs: list  # ScoredPairRecord
    name: str = "sts"

    def evaluate(self, state: EncoderState, vocab: Vocabulary, max_len: int) -> dict:
        first = _matrix(state, [p.text1 for p in self.pairs], vocab, max_len)
        second = _matrix(state, [p.text2 for p in self.pairs], vocab, max_len)
        return {"spearman": spearman(_row_cosines(first, second), [p.score for p in self.pairs])}


@dataclass
class PairClassificationTask:
    """Average precision of cosine scores against 0/1 pair labels."""

    pairs: list  # ScoredPairRecord with score 0 or 1
    name: str = "pair_classification"

    def evaluate(self, state: EncoderState, vocab: Vocabulary, max_len: int) -> dict:
        labels = np.asarray([p.score for p in self.pairs])
        if not set(np.unique(labels)) <= {0.0, 1.0} or labels.sum() == 0:
            raise EvaluationError("pair classification needs 0/1 labels with at least one positive")
        first = _matrix(state, [p.text1 for p in self.pairs], vocab, max_len)
        second = _matrix(state, [p.text2 for p in self.pairs], vocab, max_len)
        return {"average_precision": float(average_precision_score(labels, _row_cosines(first, second)))}


@dataclass
class ClassificationTask:
    """Logistic regression fitted on training embeddings, accuracy on the test split."""

    train: list  # LabeledTextRecord
    test: list
    max_iter: int = 1000
    name: str = "classification"

    def evaluate(self, state: EncoderState, vocab: Vocabulary, max_len: int) -> dict:
        x_train = _matrix(state, [r.text for r in self.train], vocab, max_len)
        x_test = _matrix(state, [r.text for r in self.test], vocab, max_len)
        model = LogisticRegression(max_iter=self.max_iter)
        model.fit(x_train, [r.label for r in self.train])
        return {"accuracy": float(accuracy_score([r.label for r in self.test], model.predict(x_test)))}


@dataclass
class RerankingTask:
    """Mean average precision of candidates re-ranked by cosine similarity to the query."""

    records: list = field(default_factory=list)  # RerankRecord
    name: str = "reranking"

    def evaluate(self, state: EncoderState, vocab: Vocabulary, max_len: int) -> dict:
        scores = []
        for record in self.records:
            candidates = list(record.positive) + list(record.negative)
            query = _matrix(state, [record.query], vocab, max_len)
            docs = _matrix(state, candidates, vocab, max_len)
            ids = [str(i) for i in range(len(candidates))]
            ranked = rank_documents(query, docs, ["q"], ids)["q"]
            relevant = set(ids[:len(record.positive)])
            scores.append(average_precision(ranked, relevant, len(candidates)))
        return {"map": float(np.mean(scores))}


def split_labelled(records: Sequence[LabeledTextRecord], test_fraction: float = 0.2, seed: int = 0) -> tuple:
    """Seeded train/test split for ClassificationTask."""
    order = np.random.default_rng(seed).permutation(len(records))
    cut = int(round(len(records) * (1.0 - test_fraction)))
    return [records[i] for i in order[:cut]], [records[i] for i in order[cut:]]


def log_metrics(name: str, max_len: int, metrics: dict) -> None:
    summary = ", ".join(f"{k}={v:.4f}" for k, v in metrics.items())
    logger.info(f"[{name}] max_len={max_len}: {summary}")
