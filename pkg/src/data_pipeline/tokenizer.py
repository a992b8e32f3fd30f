# src/data_pipeline/tokenizer.py
"""WordPiece tokenization that keeps track of which word every token came from."""
from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from src import config
from src.exceptions import ShapeError, VocabularyError
from src.logger import logger

_PRE_SPLIT = re.compile(r"\w+|[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class Vocabulary:
    """Token strings indexed by id; ids equal line numbers of the vocabulary file."""

    tokens: tuple
    token_to_id: dict = field(repr=False, compare=False)

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Vocabulary":
        tokens = tuple(tokens)
        token_to_id = {}
        for index, token in enumerate(tokens):
            if token in token_to_id:
                raise VocabularyError(f"Duplicate token '{token}' at ids {token_to_id[token]} and {index}")
            token_to_id[token] = index
        for special in config.SPECIAL_TOKENS:
            if special not in token_to_id:
                raise VocabularyError(f"Vocabulary is missing special token '{special}'")
        if token_to_id[config.PAD_TOKEN] != 0:
            raise VocabularyError(f"'{config.PAD_TOKEN}' must have id 0, found {token_to_id[config.PAD_TOKEN]}")
        return cls(tokens=tokens, token_to_id=token_to_id)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    @property
    def pad_id(self) -> int: return self.token_to_id[config.PAD_TOKEN]
    @property
    def unk_id(self) -> int: return self.token_to_id[config.UNK_TOKEN]
    @property
    def cls_id(self) -> int: return self.token_to_id[config.CLS_TOKEN]
    @property
    def sep_id(self) -> int: return self.token_to_id[config.SEP_TOKEN]
    @property
    def mask_id(self) -> int: return self.token_to_id[config.MASK_TOKEN]

    @property
    def special_ids(self) -> frozenset:
        return frozenset(self.token_to_id[t] for t in config.SPECIAL_TOKENS)

    @property
    def unmaskable_ids(self) -> frozenset:
        """Structural tokens; an [UNK] stands for a real word and may be masked."""
        return self.special_ids - {self.unk_id}

    @cached_property
    def replaceable_ids(self) -> np.ndarray:
        """Ids a masked token may be swapped for: everything but the special tokens."""
        ids = np.asarray([i for i in range(len(self.tokens)) if i not in self.special_ids], dtype=np.int64)
        ids.flags.writeable = False
        return ids

    def fingerprint(self) -> str:
        """Stable digest of the token list, stored in checkpoints to detect mismatches."""
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(self.tokens) + "\n")


@dataclass
class TokenizedSequence:
    token_ids: list
    word_ids: list
    attention_mask: list

    def __len__(self) -> int:
        return len(self.token_ids)


@dataclass
class TokenBatch:
    """Right-padded (B, L) integer arrays."""

    input_ids: np.ndarray
    word_ids: np.ndarray
    attention_mask: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.input_ids.shape


def load_vocab(path: str) -> Vocabulary:
    """Reads a UTF-8 vocabulary file, one token per line."""
    logger.info(f"Loading vocabulary from {path}")
    if not os.path.exists(path):
        logger.error(f"Vocabulary file not found: {path}")
        raise VocabularyError(f"Vocabulary file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        tokens = [line.rstrip("\r\n") for line in f]
    while tokens and tokens[-1] == "":
        tokens.pop()
    vocab = Vocabulary.from_tokens(tokens)
    logger.info(f"Vocabulary loaded with {len(vocab)} tokens.")
    return vocab


def pre_split(text: str, lowercase: bool = True) -> list:
    """Whitespace-and-punctuation split; every punctuation mark becomes its own word."""
    if lowercase:
        text = text.lower()
    return _PRE_SPLIT.findall(text)


def wordpiece(word: str, vocab: Vocabulary) -> list:
    """Greedy longest-match-first split of one word; unmatchable words become [UNK]."""
    if len(word) > config.MAX_CHARS_PER_WORD:
        return [config.UNK_TOKEN]
    pieces = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            candidate = word[start:end]
            if start > 0:
                candidate = config.CONTINUATION_PREFIX + candidate
            if candidate in vocab:
                match = candidate
                break
            end -= 1
        if match is None:
            return [config.UNK_TOKEN]
        pieces.append(match)
        start = end
    return pieces


def tokenize(text: str, vocab: Vocabulary, max_len: int, lowercase: bool = True) -> TokenizedSequence:
    """[CLS] wordpieces [SEP], keeping only the initial tokens when longer than `max_len`."""
    if max_len < 2:
        raise ShapeError(f"max_len must leave room for [CLS] and [SEP], got {max_len}")
    budget = max_len - 2
    token_ids = [vocab.cls_id]
    word_ids = [config.SPECIAL_WORD_ID]
    for word_index, word in enumerate(pre_split(text, lowercase)):
        if len(token_ids) - 1 >= budget:
            break
        for piece in wordpiece(word, vocab):
            if len(token_ids) - 1 >= budget:
                break
            token_ids.append(vocab.token_to_id[piece])
            word_ids.append(word_index)
    token_ids.append(vocab.sep_id)
    word_ids.append(config.SPECIAL_WORD_ID)
    return TokenizedSequence(token_ids=token_ids, word_ids=word_ids, attention_mask=[1] * len(token_ids))


def pad_batch(seqs: Sequence[TokenizedSequence], pad_id: int = 0) -> TokenBatch:
    """Right-pads to the longest sequence; padding carries mask 0 and the special word id."""
    if not seqs:
        raise ShapeError("pad_batch needs at least one sequence")
    length = max(len(s) for s in seqs)
    input_ids = np.full((len(seqs), length), pad_id, dtype=np.int64)
    word_ids = np.full((len(seqs), length), config.SPECIAL_WORD_ID, dtype=np.int64)
    attention_mask = np.zeros((len(seqs), length), dtype=np.int64)
    for row, seq in enumerate(seqs):
        n = len(seq)
        input_ids[row, :n] = seq.token_ids
        word_ids[row, :n] = seq.word_ids
        attention_mask[row, :n] = seq.attention_mask
    return TokenBatch(input_ids=input_ids, word_ids=word_ids, attention_mask=attention_mask)


def detokenize(token_ids: Sequence[int], vocab: Vocabulary) -> str:
    """Joins wordpieces back into words, dropping special tokens."""
    special = vocab.unmaskable_ids
    text = " ".join(vocab.tokens[i] for i in token_ids if i not in special)
    return text.replace(" " + config.CONTINUATION_PREFIX, "")
