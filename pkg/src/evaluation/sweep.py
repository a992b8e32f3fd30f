# src/evaluation/sweep.py
"""Re-running a task at several maximum sequence lengths."""
from typing import Sequence

import pandas as pd
from tqdm import tqdm

from src.data_pipeline.io_utils import write_csv
from src.data_pipeline.tokenizer import Vocabulary
from src.exceptions import EvaluationError
from src.logger import logger
from src.model.encoder import EncoderState
from .tasks import log_metrics

SWEEP_COLUMNS = ["length", "metric", "value"]


def length_sweep(state: EncoderState, task, lengths: Sequence[int], vocab: Vocabulary,
                 show_progress: bool = False) -> pd.DataFrame:
    """One row per (length, metric); documents are truncated to each length in turn."""
    lengths = [int(n) for n in lengths]
    if not lengths:
        raise EvaluationError("length sweep needs at least one length")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise EvaluationError(f"sweep lengths must be strictly ascending, got {lengths}")
    if lengths[0] < 2:
        raise EvaluationError("sweep lengths must leave room for [CLS] and [SEP]")

    logger.info(f"--- Starting {task.name} length sweep over {lengths} ---")
    rows = []
    for length in tqdm(lengths, desc=f"{task.name} sweep", disable=not show_progress):
        metrics = task.evaluate(state, vocab, length)
        log_metrics(task.name, length, metrics)
        rows.extend((length, name, float(value)) for name, value in metrics.items())
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def save_sweep(frame: pd.DataFrame, path: str) -> None:
    write_csv(frame, path, index=False)
    logger.info(f"Sweep table saved to {path}")
