# train/train.py
import math
import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.core import tensor as T
from src.data_pipeline.io_utils import write_csv
from src.data_pipeline.tokenizer import Vocabulary
from src.exceptions import NumericError
from src.logger import logger
from src.model.contrastive import hard_negative_loss, pair_info_nce
from src.model.embedder import embed_texts
from src.model.encoder import EncoderState
from src.model.mlm import mlm_loss
from . import config
from .checkpoint import Checkpoint, save_checkpoint
from .data_loader import get_batches, step_rng
from .optimizer import AdamWState, adamw_step, lr_at

LOSS_COLUMNS = ["step", "stage", "loss", "lr", "grad_norm"]
EVAL_COLUMNS = ["step", "stage", "metric", "value"]


@dataclass
class StageResult:
    state: EncoderState
    optimizer: AdamWState
    step: int
    loss_log: pd.DataFrame
    eval_log: pd.DataFrame
    sampler_state: Optional[dict] = None

    def checkpoint(self, stage: str, seed: int, vocab: Optional[Vocabulary] = None,
                   train_config: Optional[dict] = None) -> Checkpoint:
        return Checkpoint.from_state(
            self.state, step=self.step, seed=seed, stage=stage, optimizer=self.optimizer,
            vocab_fingerprint=vocab.fingerprint() if vocab is not None else None,
            sampler_state=self.sampler_state, train_config=train_config,
        )


def stage_loss(stage: str, state: EncoderState, batch, train_cfg: "config.TrainConfig",
               vocab: Vocabulary, rng: np.random.Generator) -> T.Tensor:
    """Training loss of one batch, with dropout on."""
    if stage == "pretrain":
        return mlm_loss(state, batch, training=True, rng=rng)
    max_len = train_cfg.train_seq_len
    queries = embed_texts(state, batch.queries, vocab, max_len, training=True, rng=rng)
    if stage == "pairs":
        targets = embed_texts(state, batch.targets, vocab, max_len, training=True, rng=rng)
        return pair_info_nce(queries, targets, train_cfg.temperature)
    positives = embed_texts(state, batch.positives, vocab, max_len, training=True, rng=rng)
    negatives = embed_texts(state, batch.flat_negatives(), vocab, max_len, training=True, rng=rng)
    return hard_negative_loss(queries, positives, negatives, train_cfg.temperature)


def run_stage(stage: str, records: Sequence, state: EncoderState, vocab: Vocabulary,
              train_cfg: "config.TrainConfig", optimizer: Optional[AdamWState] = None,
              start_step: int = 0, sampler_state: Optional[dict] = None, stop_at: Optional[int] = None,
              evaluate: Optional[Callable[[EncoderState], dict]] = None,
              out_dir: Optional[str] = None, show_progress: bool = True) -> StageResult:
    """
    Trains `state` in place on one stage: "pretrain" (MLM loss on masked batches),
    "pairs" (bidirectional InfoNCE) or "triplets" (hard-negative InfoNCE).

    Steps run from `start_step` to the optimizer's total_steps, or to `stop_at` when
    given. Resuming from a checkpoint's step, moments and sampler state reproduces
    the uninterrupted run.
    """
    opt_cfg = train_cfg.optimizer
    end_step = opt_cfg.total_steps if stop_at is None else min(stop_at, opt_cfg.total_steps)
    logger.info(f"--- Starting {stage} stage: steps {start_step}..{end_step} ---")

    with T.default_dtype(np.dtype(train_cfg.precision)):
        batches = get_batches(stage, records, vocab, train_cfg)
        batches.load_state_dict(sampler_state)
        optimizer = optimizer if optimizer is not None else AdamWState.zeros_like(state.params)
        loss_rows, eval_rows = [], []

        progress = tqdm(range(start_step, end_step), desc=stage, disable=not show_progress)
        for step in progress:
            batch = batches.batch_at(step)
            if batch is None:
                logger.warning(f"⚠️ Step {step}: no maskable tokens in the batch, skipping.")
                continue
            loss = stage_loss(stage, state, batch, train_cfg, vocab, step_rng(train_cfg.seed, step, config.PURPOSE_DROPOUT))
            loss_value = loss.item()
            if not math.isfinite(loss_value):
                logger.error(f"❌ Non-finite {stage} loss at step {step}: {loss_value}")
                raise NumericError(f"non-finite {stage} loss at step {step}")

            state.zero_grad()
            T.backward(loss, inputs=state.parameters())
            grad_norm = adamw_step(state.params, optimizer, opt_cfg)
            loss_rows.append((step + 1, stage, loss_value, lr_at(optimizer.step, opt_cfg), grad_norm))
            progress.set_postfix(loss=f"{loss_value:.4f}")

            if (step + 1) % train_cfg.log_every == 0:
                logger.info(f"[{stage}] step {step + 1} | loss {loss_value:.4f} | lr {loss_rows[-1][3]:.2e} | grad norm {grad_norm:.3f}")
            if evaluate is not None and train_cfg.eval_every and (step + 1) % train_cfg.eval_every == 0:
                with T.no_grad():
                    metrics = evaluate(state)
                eval_rows.extend((step + 1, stage, name, float(value)) for name, value in metrics.items())
            if out_dir and train_cfg.checkpoint_every and (step + 1) % train_cfg.checkpoint_every == 0:
                interim = StageResult(state, optimizer, step + 1, None, None, batches.state_dict())
                save_checkpoint(os.path.join(out_dir, config.CHECKPOINT_NAME),
                                interim.checkpoint(stage, train_cfg.seed, vocab, train_cfg.model_dump()))

    result = StageResult(
        state=state,
        optimizer=optimizer,
        step=end_step,
        loss_log=pd.DataFrame(loss_rows, columns=LOSS_COLUMNS),
        eval_log=pd.DataFrame(eval_rows, columns=EVAL_COLUMNS),
        sampler_state=batches.state_dict(),
    )
    if loss_rows:
        logger.info(f"--- {stage} stage finished at step {end_step}, final loss {loss_rows[-1][2]:.4f} ---")
    return result


def _with_history(frame: pd.DataFrame, history_path: Optional[str], start_step: int) -> pd.DataFrame:
    """Prepends the rows up to `start_step` that an earlier run left in `history_path`."""
    if history_path is None or start_step == 0 or not os.path.exists(history_path):
        return frame
    earlier = pd.read_csv(history_path)
    earlier = earlier[earlier["step"] <= start_step]
    if len(earlier) == 0:
        return frame
    logger.info(f"Carrying {len(earlier)} rows up to step {start_step} forward from {history_path}")
    return pd.concat([earlier, frame], ignore_index=True) if len(frame) else earlier.reset_index(drop=True)


def save_logs(result: StageResult, out_dir: str, history_dir: Optional[str] = None, start_step: int = 0) -> None:
    """
    Writes the loss (and eval) CSVs. A resumed run passes the directory of the
    checkpoint it resumed from, so the logs cover the whole run from step 1.
    """
    for frame, name in ((result.loss_log, config.LOSS_LOG_NAME), (result.eval_log, config.EVAL_LOG_NAME)):
        history = os.path.join(history_dir, name) if history_dir is not None else None
        frame = _with_history(frame, history, start_step)
        if name == config.LOSS_LOG_NAME or not frame.empty:
            write_csv(frame, os.path.join(out_dir, name), index=False)
