# src/data_pipeline/synthetic.py
"""
Seeded toy datasets for desk-scale experiments.

All generators draw words from one `Lexicon` of made-up words, so a single
vocabulary covers every dataset. Some nouns are split into several wordpieces
("xka ##ro ##mi") to exercise whole-word masking.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src import config
from src.exceptions import ConfigError
from .schemas import CorpusRecord, LabeledTextRecord, PairRecord, QueryRecord, ScoredPairRecord, TripletRecord
from .tokenizer import Vocabulary

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"
_SYLLABLES = [c + v for c in _CONSONANTS for v in _VOWELS]
_MULTI_PIECE_LEAD = "x"  # whole words never start with it, so greedy matching splits as generated


@dataclass
class Lexicon:
    nouns: list
    verbs: list  # nouns[i] agrees with verbs[i]
    adjectives: list
    topics: list  # one word list per topic
    filler: list
    pieces: dict = field(default_factory=dict)  # multi-piece word -> its wordpieces

    @property
    def num_topics(self) -> int:
        return len(self.topics)


def _unique_words(rng: np.random.Generator, count: int, taken: set, syllables: int = 2) -> list:
    words = []
    while len(words) < count:
        word = "".join(rng.choice(_SYLLABLES, size=syllables))
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


def make_lexicon(seed: int = 0, n_nouns: int = 12, n_adjectives: int = 8, n_topics: int = 8,
                 words_per_topic: int = 12, n_filler: int = 48, multi_piece_fraction: float = 0.25) -> Lexicon:
    rng = np.random.default_rng(seed)
    taken = {"the"}
    nouns = _unique_words(rng, n_nouns, taken)
    pieces = {}
    for i in range(int(round(multi_piece_fraction * n_nouns))):
        syllables = list(rng.choice(_SYLLABLES, size=3))
        word_pieces = [_MULTI_PIECE_LEAD + syllables[0]] + [config.CONTINUATION_PREFIX + s for s in syllables[1:]]
        word = "".join(p.replace(config.CONTINUATION_PREFIX, "") for p in word_pieces)
        if word in taken:
            continue
        taken.add(word)
        pieces[word] = word_pieces
        nouns[i] = word
    verbs = _unique_words(rng, n_nouns, taken)
    adjectives = _unique_words(rng, n_adjectives, taken)
    topics = [_unique_words(rng, words_per_topic, taken, syllables=3) for _ in range(n_topics)]
    filler = _unique_words(rng, n_filler, taken, syllables=3)
    return Lexicon(nouns=nouns, verbs=verbs, adjectives=adjectives, topics=topics, filler=filler, pieces=pieces)


def build_vocabulary(lexicon: Lexicon, size: Optional[int] = None) -> Vocabulary:
    """Specials, punctuation and every lexicon word (pieces for multi-piece words), padded with [unusedN]."""
    tokens = list(config.SPECIAL_TOKENS) + [".", "the"]
    words = lexicon.nouns + lexicon.verbs + lexicon.adjectives + lexicon.filler
    words += [w for topic in lexicon.topics for w in topic]
    for word in words:
        for token in lexicon.pieces.get(word, [word]):
            if token not in tokens:
                tokens.append(token)
    if size is not None:
        if size < len(tokens):
            raise ConfigError(f"lexicon needs {len(tokens)} tokens, more than the requested size {size}")
        tokens += [f"[unused{i}]" for i in range(size - len(tokens))]
    return Vocabulary.from_tokens(tokens)


def agreement_clause(lexicon: Lexicon, rng: np.random.Generator) -> str:
    noun = int(rng.integers(len(lexicon.nouns)))
    adjective = lexicon.adjectives[int(rng.integers(len(lexicon.adjectives)))]
    return f"the {adjective} {lexicon.nouns[noun]} {lexicon.verbs[noun]} ."


def agreement_corpus(lexicon: Lexicon, n_docs: int, min_clauses: int = 8, max_clauses: int = 16,
                     seed: int = 0) -> list:
    """
    Documents of clauses "the <adj> <noun> <verb> ." where each noun always takes
    the same verb, so masked nouns and verbs are recoverable from local context only.
    """
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_docs):
        clauses = int(rng.integers(min_clauses, max_clauses + 1))
        text = " ".join(agreement_clause(lexicon, rng) for _ in range(clauses))
        records.append(CorpusRecord(id=f"doc{i}", text=text))
    return records


def _topic_text(lexicon: Lexicon, topic: int, n_words: int, rng: np.random.Generator,
                n_filler: int = 0, exclude: Sequence[str] = ()) -> str:
    pool = [w for w in lexicon.topics[topic] if w not in exclude]
    words = list(rng.choice(pool, size=min(n_words, len(pool)), replace=False))
    words += list(rng.choice(lexicon.filler, size=n_filler))
    rng.shuffle(words)
    return " ".join(words)


def topical_pairs(lexicon: Lexicon, n_pairs: int, seed: int = 0, sources: Sequence[str] = ("alpha", "beta")) -> list:
    """(query, target) pairs that share a topic; the source tag follows the topic."""
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(n_pairs):
        topic = int(rng.integers(lexicon.num_topics))
        query = _topic_text(lexicon, topic, 3, rng)
        target = _topic_text(lexicon, topic, 6, rng, n_filler=2, exclude=query.split())
        records.append(PairRecord(query=query, target=target, source=sources[topic % len(sources)]))
    return records


def topical_triplets(lexicon: Lexicon, n_records: int, seed: int = 0) -> list:
    """Query and positive share a topic; the fifteen negatives come from other topics."""
    if lexicon.num_topics < 2:
        raise ConfigError("triplets need at least two topics")
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(n_records):
        topic = int(rng.integers(lexicon.num_topics))
        query = _topic_text(lexicon, topic, 3, rng)
        positive = _topic_text(lexicon, topic, 6, rng, n_filler=2, exclude=query.split())
        others = [t for t in range(lexicon.num_topics) if t != topic]
        negatives = [
            _topic_text(lexicon, int(rng.choice(others)), 6, rng, n_filler=2)
            for _ in range(config.NUM_HARD_NEGATIVES)
        ]
        records.append(TripletRecord(query=query, positive=positive, negatives=negatives))
    return records


def long_document_retrieval(lexicon: Lexicon, n_docs: int, n_queries: int, offset: int = 80,
                            answer_words: int = 24, seed: int = 0) -> tuple:
    """
    Documents that open with `offset` filler words and only then name their topic,
    so a reader truncated before the offset sees no topical signal.

    Returns (documents, queries, qrels); a query is relevant to every document of its topic.
    """
    rng = np.random.default_rng(seed)
    docs, by_topic = [], {}
    for i in range(n_docs):
        topic = i % lexicon.num_topics
        filler = " ".join(rng.choice(lexicon.filler, size=offset))
        answer = " ".join(rng.choice(lexicon.topics[topic], size=answer_words))
        doc_id = f"d{i}"
        docs.append(CorpusRecord(id=doc_id, text=f"{filler} {answer}"))
        by_topic.setdefault(topic, set()).add(doc_id)
    queries, qrels = [], {}
    for j in range(n_queries):
        topic = j % lexicon.num_topics
        query_id = f"q{j}"
        queries.append(QueryRecord(id=query_id, text=_topic_text(lexicon, topic, 3, rng)))
        qrels[query_id] = set(by_topic.get(topic, set()))
    return docs, queries, qrels


def labelled_topics(lexicon: Lexicon, n_items: int, seed: int = 0, n_words: int = 6) -> list:
    """Clustering / classification items labelled by topic."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_items):
        topic = i % lexicon.num_topics
        records.append(LabeledTextRecord(id=f"t{i}", text=_topic_text(lexicon, topic, n_words, rng, n_filler=2),
                                         label=f"topic{topic}"))
    return records


def scored_pairs(lexicon: Lexicon, n_pairs: int, seed: int = 0) -> list:
    """STS items: the gold score (0..5) is the share of topic words the two texts have in common."""
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(n_pairs):
        topic = int(rng.integers(lexicon.num_topics))
        first = list(rng.choice(lexicon.topics[topic], size=6, replace=False))
        shared = int(rng.integers(0, 7))
        other = int(rng.integers(lexicon.num_topics))
        second = first[:shared] + list(rng.choice(lexicon.topics[other], size=6 - shared))
        records.append(ScoredPairRecord(text1=" ".join(first), text2=" ".join(second), score=5.0 * shared / 6))
    return records
