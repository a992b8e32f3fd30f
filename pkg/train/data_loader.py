# train/data_loader.py
"""Per-stage batch sources. Every batch is a pure function of (seed, step) plus, for
the contrastive stages, the sampler state stored in checkpoints."""
from typing import Optional, Sequence

import numpy as np

from src.data_pipeline.sampler import SamplingPlan, group_by_source, next_pair_batch
from src.data_pipeline.schemas import CorpusRecord, PairRecord, TripletRecord
from src.data_pipeline.tokenizer import Vocabulary, tokenize
from src.exceptions import DataError
from src.logger import logger
from src.model.contrastive import PairBatch, TripletBatch
from src.model.mlm import apply_whole_word_masking, collate_masked
from . import config

STAGE_SCHEMAS = {"pretrain": CorpusRecord, "pairs": PairRecord, "triplets": TripletRecord}


def check_stage_records(stage: str, records: Sequence) -> None:
    """Raises DataError naming the first record that does not belong to `stage`."""
    if stage not in STAGE_SCHEMAS:
        raise DataError(f"Unknown stage '{stage}'. Expected one of {sorted(STAGE_SCHEMAS)}")
    if not records:
        raise DataError(f"Stage '{stage}' received no records")
    expected = STAGE_SCHEMAS[stage]
    for index, record in enumerate(records):
        if not isinstance(record, expected):
            raise DataError(
                f"Stage '{stage}' expects {expected.__name__} records; record {index} is {record!r}"
            )


def step_rng(seed: int, step: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng([seed, step, purpose])


class PretrainBatches:
    """Masked batches over one truncated sequence per document, reshuffled every epoch."""

    def __init__(self, records: Sequence[CorpusRecord], vocab: Vocabulary, train_cfg: "config.TrainConfig"):
        self.vocab = vocab
        self.cfg = train_cfg
        self.sequences = [tokenize(r.text, vocab, train_cfg.train_seq_len) for r in records]
        self._orders = {}
        logger.info(f"Pretraining on {len(self.sequences)} documents truncated to {train_cfg.train_seq_len} tokens")

    def _order(self, epoch: int) -> np.ndarray:
        if epoch not in self._orders:
            self._orders = {epoch: np.random.default_rng([self.cfg.seed, epoch]).permutation(len(self.sequences))}
        return self._orders[epoch]

    def indices_at(self, step: int) -> list:
        n, size = len(self.sequences), self.cfg.batch_size
        indices = []
        for position in range(step * size, (step + 1) * size):
            epoch, offset = divmod(position, n)
            indices.append(int(self._order(epoch)[offset]))
        return indices

    def batch_at(self, step: int):
        """The masked batch for `step`, or None when none of its documents has a maskable token."""
        rng = step_rng(self.cfg.seed, step, config.PURPOSE_MASKING)
        masked = [
            apply_whole_word_masking(self.sequences[i], self.vocab, rate=self.cfg.mask_rate, rng=rng)
            for i in self.indices_at(step)
        ]
        masked = [m for m in masked if not m.is_empty]
        if not masked:
            return None
        return collate_masked(masked, pad_id=self.vocab.pad_id)

    def state_dict(self) -> Optional[dict]:
        return None

    def load_state_dict(self, state: Optional[dict]) -> None:
        pass


class PairBatches:
    """Source-homogeneous pair batches drawn from a weighted SamplingPlan."""

    def __init__(self, records: Sequence[PairRecord], train_cfg: "config.TrainConfig"):
        self.cfg = train_cfg
        self.plan = SamplingPlan(group_by_source(records), weights=train_cfg.source_weights, seed=train_cfg.seed)

    def batch_at(self, step: int) -> PairBatch:
        return next_pair_batch(self.plan, self.cfg.batch_size)

    def state_dict(self) -> dict:
        return self.plan.state_dict()

    def load_state_dict(self, state: Optional[dict]) -> None:
        if state is not None:
            self.plan.load_state_dict(state)


class TripletBatches:
    def __init__(self, records: Sequence[TripletRecord], train_cfg: "config.TrainConfig"):
        self.cfg = train_cfg
        self.plan = SamplingPlan({"triplets": list(records)}, seed=train_cfg.seed)

    def batch_at(self, step: int) -> TripletBatch:
        _, rows = self.plan.next_batch(self.cfg.batch_size)
        return TripletBatch(
            queries=[r.query for r in rows],
            positives=[r.positive for r in rows],
            negatives=[list(r.negatives) for r in rows],
        )

    def state_dict(self) -> dict:
        return self.plan.state_dict()

    def load_state_dict(self, state: Optional[dict]) -> None:
        if state is not None:
            self.plan.load_state_dict(state)


def get_batches(stage: str, records: Sequence, vocab: Vocabulary, train_cfg: "config.TrainConfig"):
    check_stage_records(stage, records)
    if stage == "pretrain":
        return PretrainBatches(records, vocab, train_cfg)
    if stage == "pairs":
        return PairBatches(records, train_cfg)
    return TripletBatches(records, train_cfg)
