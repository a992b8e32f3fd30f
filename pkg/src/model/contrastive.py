# src/model/contrastive.py
"""
Bidirectional InfoNCE over in-batch negatives, and its hard-negative variant.

Both losses work on cosine similarities divided by a temperature. The score-level
functions take similarity matrices directly; the embedding-level ones compute
them from pooled embeddings.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from src import config
from src.core import tensor as T
from src.core.tensor import Tensor
from src.exceptions import ConfigError, ShapeError
from src.model.embedder import cosine_similarity_matrix


@dataclass
class PairBatch:
    queries: list
    targets: list
    source: str = "default"

    def __post_init__(self):
        if len(self.queries) != len(self.targets):
            raise ShapeError(f"{len(self.queries)} queries but {len(self.targets)} targets")
        if len(self.queries) < 2:
            raise ShapeError("a pair batch needs at least 2 pairs for in-batch negatives")

    def __len__(self) -> int:
        return len(self.queries)


@dataclass
class TripletBatch:
    queries: list
    positives: list
    negatives: list = field(default_factory=list)  # one list of NUM_HARD_NEGATIVES texts per record

    def __post_init__(self):
        if not (len(self.queries) == len(self.positives) == len(self.negatives)) or not self.queries:
            raise ShapeError("a triplet batch needs matching, non-empty query/positive/negative lists")
        for row, negs in enumerate(self.negatives):
            if len(negs) != config.NUM_HARD_NEGATIVES:
                raise ShapeError(
                    f"record {row} has {len(negs)} negatives, expected {config.NUM_HARD_NEGATIVES}"
                )

    def __len__(self) -> int:
        return len(self.queries)

    def flat_negatives(self) -> list:
        """Negatives in record-major order (all of record 0, then record 1, ...)."""
        return [text for negs in self.negatives for text in negs]


def _check_temperature(tau: float) -> None:
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")


def info_nce_from_scores(scores: Tensor, tau: float = config.TEMPERATURE) -> Tensor:
    """
    Loss for a (k, k) similarity matrix with positives on the diagonal, in both
    directions: CE over rows plus CE over columns.
    """
    scores = T.as_tensor(scores)
    _check_temperature(tau)
    k = scores.shape[0]
    if scores.ndim != 2 or scores.shape[1] != k:
        raise ShapeError(f"pair scores must be square, got {scores.shape}")
    if k < 2:
        raise ShapeError("in-batch InfoNCE needs at least 2 pairs")
    logits = scores * (1.0 / tau)
    targets = np.arange(k)
    return T.cross_entropy(logits, targets) + T.cross_entropy(logits.transpose(1, 0), targets)


def hard_negative_from_scores(pair_scores: Tensor, negative_scores: Tensor,
                              tau: float = config.TEMPERATURE) -> Tensor:
    """
    `pair_scores` is (k, k) with positives on the diagonal; `negative_scores` is
    (k, m) with every query scored against the hard negatives of every record.
    The forward term's denominator covers all targets and all hard negatives; the
    reversed term is plain InfoNCE from targets to queries.
    """
    pair_scores, negative_scores = T.as_tensor(pair_scores), T.as_tensor(negative_scores)
    _check_temperature(tau)
    k = pair_scores.shape[0]
    if pair_scores.shape != (k, k) or negative_scores.ndim != 2 or negative_scores.shape[0] != k:
        raise ShapeError(f"incompatible score shapes {pair_scores.shape} and {negative_scores.shape}")
    targets = np.arange(k)
    forward_logits = T.concat([pair_scores, negative_scores], axis=1) * (1.0 / tau)
    reversed_logits = pair_scores.transpose(1, 0) * (1.0 / tau)
    return T.cross_entropy(forward_logits, targets) + T.cross_entropy(reversed_logits, targets)


def pair_info_nce(query_emb: Tensor, target_emb: Tensor, tau: float = config.TEMPERATURE) -> Tensor:
    """Loss for k (query, target) embedding pairs, each (k, D)."""
    query_emb, target_emb = T.as_tensor(query_emb), T.as_tensor(target_emb)
    if query_emb.shape != target_emb.shape:
        raise ShapeError(f"query {query_emb.shape} and target {target_emb.shape} embeddings disagree")
    if query_emb.shape[0] < 2:
        raise ShapeError("in-batch InfoNCE needs at least 2 pairs")
    return info_nce_from_scores(cosine_similarity_matrix(query_emb, target_emb), tau)


def hard_negative_loss(query_emb: Tensor, positive_emb: Tensor, negative_emb: Tensor,
                       tau: float = config.TEMPERATURE,
                       num_negatives: int = config.NUM_HARD_NEGATIVES) -> Tensor:
    """
    Loss for k triplets. `negative_emb` is (k, num_negatives, D) or the same rows
    flattened record-major to (k * num_negatives, D).
    """
    query_emb, positive_emb, negative_emb = (T.as_tensor(t) for t in (query_emb, positive_emb, negative_emb))
    k, dim = query_emb.shape
    if positive_emb.shape != (k, dim):
        raise ShapeError(f"query {query_emb.shape} and positive {positive_emb.shape} embeddings disagree")
    if negative_emb.ndim == 3:
        if negative_emb.shape[:2] != (k, num_negatives):
            raise ShapeError(f"expected ({k}, {num_negatives}, D) negatives, got {negative_emb.shape}")
        negative_emb = negative_emb.reshape(k * num_negatives, dim)
    elif negative_emb.shape != (k * num_negatives, dim):
        raise ShapeError(
            f"expected {num_negatives} negatives per record ({k * num_negatives} rows), got {negative_emb.shape}"
        )
    pair_scores = cosine_similarity_matrix(query_emb, positive_emb)
    negative_scores = cosine_similarity_matrix(query_emb, negative_emb)
    return hard_negative_from_scores(pair_scores, negative_scores, tau)
