# src/data_pipeline/sampler.py
"""
Source-homogeneous batch sampling for contrastive fine-tuning.

Each batch draws one data source by weight and takes consecutive records from
that source's shuffled order. A source is reshuffled when what remains of its
order is shorter than the batch, so a batch never repeats a record.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.exceptions import ConfigError, DataError
from src.logger import logger
from src.model.contrastive import PairBatch


def _source_order(seed: int, source: int, epoch: int, size: int) -> np.ndarray:
    return np.random.default_rng([seed, source, epoch]).permutation(size)


@dataclass
class SamplingPlan:
    """
    Weighted sources with one cursor each. `records` maps a source name to its
    records; weights default to source sizes and are normalized to sum to 1.
    """

    records: dict
    weights: Optional[dict] = None
    seed: int = 0
    _names: list = field(init=False, repr=False)
    _probs: np.ndarray = field(init=False, repr=False)
    _cursor: dict = field(init=False, repr=False)
    _epoch: dict = field(init=False, repr=False)
    _order: dict = field(init=False, repr=False)
    _rng: np.random.Generator = field(init=False, repr=False)
    _capped: set = field(init=False, repr=False, default_factory=set)

    def __post_init__(self):
        self._names = [name for name, rows in self.records.items() if len(rows) > 0]
        if not self._names:
            raise DataError("sampling plan has no non-empty source")
        raw = self.weights or {name: len(self.records[name]) for name in self._names}
        unknown = set(raw) - set(self.records)
        if unknown:
            raise DataError(f"weights given for unknown sources: {sorted(unknown)}")
        values = np.asarray([float(raw.get(name, 0.0)) for name in self._names])
        if np.any(values < 0) or values.sum() <= 0:
            raise DataError(f"source weights must be nonnegative with a positive sum, got {raw}")
        self._probs = values / values.sum()
        self._rng = np.random.default_rng(self.seed)
        self._cursor = {name: 0 for name in self._names}
        self._epoch = {name: 0 for name in self._names}
        self._order = {
            name: _source_order(self.seed, i, 0, len(self.records[name])) for i, name in enumerate(self._names)
        }
        logger.info(
            "Sampling plan: " + ", ".join(f"{n}={p:.3f} ({len(self.records[n])})" for n, p in zip(self._names, self._probs))
        )

    @property
    def probabilities(self) -> dict:
        return dict(zip(self._names, self._probs.tolist()))

    def _take(self, name: str, count: int) -> list:
        """`count` distinct records; an epoch tail too short for the batch is skipped."""
        rows = self.records[name]
        if len(rows) - self._cursor[name] < count:
            index = self._names.index(name)
            self._epoch[name] += 1
            self._cursor[name] = 0
            self._order[name] = _source_order(self.seed, index, self._epoch[name], len(rows))
        start = self._cursor[name]
        self._cursor[name] += count
        return [rows[i] for i in self._order[name][start:start + count]]

    def next_batch(self, k: int) -> tuple:
        """(source name, k distinct records from that source, or all of them when it has fewer)."""
        if k < 1:
            raise ConfigError(f"batch size must be positive, got {k}")
        name = self._names[int(self._rng.choice(len(self._names), p=self._probs))]
        size = len(self.records[name])
        if k > size:
            if name not in self._capped:
                logger.warning(f"⚠️ Source '{name}' has {size} records; its batches are capped below {k}.")
                self._capped.add(name)
            k = size
        return name, self._take(name, k)

    def state_dict(self) -> dict:
        return {
            "seed": self.seed,
            "cursor": dict(self._cursor),
            "epoch": dict(self._epoch),
            "rng": self._rng.bit_generator.state,
        }

    def load_state_dict(self, state: dict) -> None:
        if set(state["cursor"]) != set(self._names):
            raise DataError(f"sampler state covers sources {sorted(state['cursor'])}, plan has {self._names}")
        self.seed = int(state["seed"])
        self._cursor = {k: int(v) for k, v in state["cursor"].items()}
        self._epoch = {k: int(v) for k, v in state["epoch"].items()}
        self._order = {
            name: _source_order(self.seed, i, self._epoch[name], len(self.records[name]))
            for i, name in enumerate(self._names)
        }
        self._rng = np.random.default_rng()
        self._rng.bit_generator.state = state["rng"]


def group_by_source(pairs: Sequence) -> dict:
    """PairRecords grouped by their `source` tag, in first-seen order."""
    grouped = {}
    for pair in pairs:
        grouped.setdefault(pair.source, []).append(pair)
    return grouped


def next_pair_batch(plan: SamplingPlan, k: int):
    """A PairBatch of k consecutive pairs from one weighted-random source."""
    source, rows = plan.next_batch(k)
    return PairBatch(queries=[r.query for r in rows], targets=[r.target for r in rows], source=source)
