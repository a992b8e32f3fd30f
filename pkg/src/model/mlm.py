# src/model/mlm.py
"""Whole-word masking, the masked-language-modeling loss and MLM accuracy."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src import config
from src.core import tensor as T
from src.core.tensor import Tensor
from src.data_pipeline.tokenizer import TokenizedSequence, Vocabulary, tokenize
from src.exceptions import ConfigError, DataError, ShapeError
from src.logger import logger
from src.model.encoder import EncoderState, forward, mlm_head


@dataclass
class MaskedSequence:
    """One masked sequence. `labels` holds the original id at masked positions, IGNORE_INDEX elsewhere."""

    input_ids: np.ndarray
    labels: np.ndarray
    mask_positions: np.ndarray
    word_ids: np.ndarray
    attention_mask: np.ndarray

    @property
    def is_empty(self) -> bool:
        return self.mask_positions.size == 0

    def restore(self) -> np.ndarray:
        """The sequence before masking."""
        original = self.input_ids.copy()
        original[self.mask_positions] = self.labels[self.mask_positions]
        return original


@dataclass
class MaskedBatch:
    """
    Right-padded (B, L) arrays; `mask_positions` is an (n, 2) array of (row, column)
    pairs in row-major order.
    """

    input_ids: np.ndarray
    labels: np.ndarray
    mask_positions: np.ndarray
    word_ids: np.ndarray
    attention_mask: np.ndarray

    @property
    def num_masked(self) -> int:
        return int(self.mask_positions.shape[0])


def _maskable_words(seq: TokenizedSequence, unmaskable_ids: frozenset) -> dict:
    """word_id -> token positions, for every word outside the structural tokens."""
    words = {}
    for position, (token_id, word_id) in enumerate(zip(seq.token_ids, seq.word_ids)):
        if word_id == config.SPECIAL_WORD_ID or token_id in unmaskable_ids or not seq.attention_mask[position]:
            continue
        words.setdefault(word_id, []).append(position)
    return words


def apply_whole_word_masking(seq: TokenizedSequence, vocab: Vocabulary, rate: float = config.MLM_MASK_RATE,
                             seed=0, rng: Optional[np.random.Generator] = None) -> MaskedSequence:
    """
    Selects whole words in random order until at least ceil(rate x maskable tokens)
    tokens are covered, then replaces each selected token with [MASK] (80%), a random
    non-special token (10%) or leaves it unchanged (10%).

    A sequence with nothing maskable yields an empty result.
    """
    if not 0.0 < rate <= 1.0:
        raise ConfigError(f"mask rate must be in (0, 1], got {rate}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    input_ids = np.asarray(seq.token_ids, dtype=np.int64).copy()
    labels = np.full_like(input_ids, config.IGNORE_INDEX)
    word_ids = np.asarray(seq.word_ids, dtype=np.int64)
    attention_mask = np.asarray(seq.attention_mask, dtype=np.int64)

    words = _maskable_words(seq, vocab.unmaskable_ids)
    maskable = sum(len(p) for p in words.values())
    if maskable == 0:
        return MaskedSequence(input_ids, labels, np.zeros(0, dtype=np.int64), word_ids, attention_mask)

    target = math.ceil(rate * maskable - 1e-9)
    word_order = list(words)
    selected = []
    for index in rng.permutation(len(word_order)):
        if len(selected) >= target:
            break
        selected.extend(words[word_order[index]])
    positions = np.sort(np.asarray(selected, dtype=np.int64))

    labels[positions] = input_ids[positions]
    draws = rng.random(len(positions))
    to_mask = draws < config.MLM_MASK_TOKEN_PROB
    to_random = (draws >= config.MLM_MASK_TOKEN_PROB) & (
        draws < config.MLM_MASK_TOKEN_PROB + config.MLM_RANDOM_TOKEN_PROB
    )
    input_ids[positions[to_mask]] = vocab.mask_id
    if to_random.any():
        input_ids[positions[to_random]] = rng.choice(vocab.replaceable_ids, size=int(to_random.sum()))
    return MaskedSequence(input_ids, labels, positions, word_ids, attention_mask)


def collate_masked(sequences: Sequence[MaskedSequence], pad_id: int = 0) -> MaskedBatch:
    """Right-pads masked sequences into a batch; empty sequences are dropped."""
    sequences = [s for s in sequences if not s.is_empty]
    if not sequences:
        raise ShapeError("collate_masked received no sequence with a masked position")
    length = max(len(s.input_ids) for s in sequences)
    shape = (len(sequences), length)
    input_ids = np.full(shape, pad_id, dtype=np.int64)
    labels = np.full(shape, config.IGNORE_INDEX, dtype=np.int64)
    word_ids = np.full(shape, config.SPECIAL_WORD_ID, dtype=np.int64)
    attention_mask = np.zeros(shape, dtype=np.int64)
    positions = []
    for row, s in enumerate(sequences):
        n = len(s.input_ids)
        input_ids[row, :n] = s.input_ids
        labels[row, :n] = s.labels
        word_ids[row, :n] = s.word_ids
        attention_mask[row, :n] = s.attention_mask
        positions.extend((row, int(col)) for col in s.mask_positions)
    return MaskedBatch(input_ids, labels, np.asarray(positions, dtype=np.int64).reshape(-1, 2),
                       word_ids, attention_mask)


def masked_logits(state: EncoderState, batch: MaskedBatch, training: bool = False,
                  rng: Optional[np.random.Generator] = None) -> Tensor:
    """(n, |V|) logits at the masked positions, in `mask_positions` order."""
    hidden = forward(state, batch, training=training, rng=rng)
    batch_size, length, width = hidden.shape
    flat = batch.mask_positions[:, 0] * length + batch.mask_positions[:, 1]
    selected = T.gather_rows(hidden.reshape(batch_size * length, width), flat)
    return mlm_head(state, selected)


def mlm_loss(state: EncoderState, batch: MaskedBatch, training: bool = False,
             rng: Optional[np.random.Generator] = None) -> Tensor:
    """Mean negative log-likelihood of the original tokens over this batch's masked positions."""
    if batch.num_masked == 0:
        raise ShapeError("mlm_loss needs at least one masked position")
    targets = batch.labels[batch.mask_positions[:, 0], batch.mask_positions[:, 1]]
    return T.cross_entropy(masked_logits(state, batch, training, rng), targets)


def mlm_accuracy(state: EncoderState, corpus: Sequence[str], vocab: Vocabulary, seq_len: int,
                 seed: int = config.EVAL_SEED, batch_size: int = 8) -> float:
    """
    Fraction of masked positions whose argmax prediction is the original token.

    Document i is masked with a generator seeded by (seed, i), so every length of a
    sweep sees the same masking procedure.
    """
    if not corpus:
        raise DataError("mlm_accuracy needs a non-empty corpus")
    masked = []
    for index, text in enumerate(corpus):
        seq = tokenize(text, vocab, seq_len)
        masked.append(apply_whole_word_masking(seq, vocab, rng=np.random.default_rng([seed, index])))
    masked = [m for m in masked if not m.is_empty]
    if not masked:
        logger.warning(f"⚠️ No maskable tokens at seq_len={seq_len}; accuracy reported as 0.")
        return 0.0

    correct, total = 0, 0
    with T.no_grad():
        for start in range(0, len(masked), batch_size):
            batch = collate_masked(masked[start:start + batch_size], pad_id=vocab.pad_id)
            logits = masked_logits(state, batch).numpy()
            targets = batch.labels[batch.mask_positions[:, 0], batch.mask_positions[:, 1]]
            correct += int(np.sum(np.argmax(logits, axis=1) == targets))
            total += len(targets)
    accuracy = correct / total
    logger.info(f"MLM accuracy at seq_len={seq_len}: {accuracy:.4f} over {total} masked tokens")
    return accuracy
