# src/model/embedder.py
"""Mean-pooled sentence embeddings and cosine similarity."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from src import config
from src.core import tensor as T
from src.core.tensor import Tensor
from src.data_pipeline.tokenizer import Vocabulary, pad_batch, tokenize
from src.exceptions import ConfigError, EvaluationError, NumericError, ShapeError
from src.logger import logger
from src.model.encoder import EncoderState, forward


@dataclass
class EmbeddingVector:
    values: np.ndarray
    source_id: Optional[str] = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 1:
            raise ShapeError(f"an embedding is a 1-D vector, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise NumericError(f"embedding '{self.source_id}' has non-finite components")

    def __len__(self) -> int:
        return len(self.values)


def pooling_mask(attention_mask: np.ndarray, word_ids: Optional[np.ndarray] = None,
                 include_special: bool = True) -> np.ndarray:
    """Positions that enter the mean; specials ([CLS], [SEP]) drop out when `include_special` is off."""
    mask = np.asarray(attention_mask).astype(bool)
    if not include_special:
        if word_ids is None:
            raise ConfigError("excluding special tokens from pooling needs word_ids")
        mask = mask & (np.asarray(word_ids) != config.SPECIAL_WORD_ID)
    return mask


def mean_pool_tensor(hidden: Tensor, mask: np.ndarray) -> Tensor:
    """Differentiable masked mean: (B, L, D) hidden states and a (B, L) mask -> (B, D)."""
    mask = np.asarray(mask, dtype=np.float64)
    if hidden.shape[:2] != mask.shape:
        raise ShapeError(f"hidden {hidden.shape} and pooling mask {mask.shape} disagree")
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        row = int(np.argmax(counts == 0))
        raise ShapeError(f"row {row} has no unmasked position to pool")
    weights = mask / counts[:, None]
    return (hidden * weights[:, :, None]).sum(axis=1)


def mean_pool(hidden, attention_mask, source_id: Optional[str] = None) -> EmbeddingVector:
    """Mean of an (L, D) array of hidden states over positions whose mask is 1."""
    values = hidden.numpy() if isinstance(hidden, Tensor) else np.asarray(hidden)
    mask = np.asarray(attention_mask).astype(bool)
    if values.ndim != 2 or mask.shape != values.shape[:1]:
        raise ShapeError(f"mean_pool expects (L, D) states and an (L,) mask, got {values.shape} and {mask.shape}")
    if not mask.any():
        raise ShapeError("mean_pool over an all-masked sequence")
    return EmbeddingVector(values[mask].mean(axis=0), source_id)


def _as_array(v) -> np.ndarray:
    return v.values if isinstance(v, EmbeddingVector) else np.asarray(v, dtype=np.float64)


def cosine_similarity(u, v) -> float:
    a, b = _as_array(u), _as_array(v)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare embeddings of shapes {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise EvaluationError("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_similarity_matrix(a: Tensor, b: Tensor) -> Tensor:
    """Differentiable (n, D) x (m, D) -> (n, m) cosine similarities."""
    a_norm = (a * a).sum(axis=1, keepdims=True).sqrt()
    b_norm = (b * b).sum(axis=1, keepdims=True).sqrt()
    if np.any(a_norm.numpy() == 0.0) or np.any(b_norm.numpy() == 0.0):
        raise EvaluationError("cosine similarity is undefined for a zero vector")
    return (a / a_norm) @ (b / b_norm).transpose(1, 0)


def embed_batch(state: EncoderState, batch, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> Tensor:
    """(B, D) pooled embeddings of a padded token batch, differentiable for fine-tuning."""
    hidden = forward(state, batch, training=training, rng=rng)
    mask = pooling_mask(batch.attention_mask, getattr(batch, "word_ids", None),
                        include_special=state.config.pool_special_tokens)
    return mean_pool_tensor(hidden, mask)


def embed_texts(state: EncoderState, texts: Sequence[str], vocab: Vocabulary, max_len: int,
                training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
    batch = pad_batch([tokenize(t, vocab, max_len) for t in texts], pad_id=vocab.pad_id)
    return embed_batch(state, batch, training=training, rng=rng)


def num_workers() -> int:
    try:
        return max(1, int(os.environ.get(config.NUM_THREADS_ENV, "1")))
    except ValueError:
        logger.warning(f"⚠️ Ignoring non-integer {config.NUM_THREADS_ENV}; using one worker.")
        return 1


def encode(state: EncoderState, texts: Sequence[str], vocab: Vocabulary, max_len: int,
           ids: Optional[Sequence[str]] = None, batch_size: int = 16,
           n_jobs: Optional[int] = None, show_progress: bool = False) -> list:
    """
    tokenize -> forward (dropout off) -> mean pool, one EmbeddingVector per text in input order.

    Batches run on a thread pool of `n_jobs` workers (default: ALIBI_NUM_THREADS).
    """
    if ids is not None and len(ids) != len(texts):
        raise ShapeError(f"{len(ids)} ids given for {len(texts)} texts")
    if len(vocab) != state.config.vocab_size:
        raise ShapeError(f"vocabulary has {len(vocab)} tokens but the model expects {state.config.vocab_size}")
    n_jobs = n_jobs or num_workers()
    starts = list(range(0, len(texts), batch_size))

    def run(start: int) -> np.ndarray:
        return embed_texts(state, texts[start:start + batch_size], vocab, max_len).numpy()

    iterator = tqdm(starts, desc="Encoding", disable=not show_progress)
    # grad mode is process-wide, so it is switched once around the whole pool
    with T.no_grad():
        chunks = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(run)(s) for s in iterator)
    vectors = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, state.config.hidden))
    ids = list(ids) if ids is not None else [None] * len(texts)
    return [EmbeddingVector(v, source_id) for v, source_id in zip(vectors, ids)]
