# scripts/finetune.py
import os
import sys

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.append(project_root)

import numpy as np

from src.core import tensor as T
from src.data_pipeline.loader import load_jsonl
from src.data_pipeline.tokenizer import load_vocab
from src.logger import logger
from train import config as train_config
from train.checkpoint import check_vocabulary, load_checkpoint, save_checkpoint
from train.config import TrainConfig
from train.data_loader import STAGE_SCHEMAS
from train.train import run_stage, save_logs

FINETUNE_STAGES = ("pairs", "triplets")


def run_finetune(args) -> dict:
    """
    Pair or triplet fine-tuning starting from --init-checkpoint.

    With --resume on a checkpoint of the same stage, its training configuration,
    step, optimizer moments and sampler state are continued; otherwise only its
    weights are used.
    """
    stage = args.stage
    overrides = dict(seed=args.seed, total_steps=args.steps, batch_size=args.batch_size,
                     train_seq_len=args.train_seq_len, precision=args.precision, temperature=args.temperature)
    vocab = load_vocab(args.vocab)
    records = load_jsonl(args.data, STAGE_SCHEMAS[stage])
    ckpt = load_checkpoint(args.init_checkpoint)
    check_vocabulary(ckpt, vocab, args.init_checkpoint)
    resuming = args.resume and ckpt.stage == stage
    if args.resume and not resuming:
        logger.warning(f"⚠️ --resume ignored: {args.init_checkpoint} is a {ckpt.stage} checkpoint, not {stage}")
    if resuming:
        train_cfg = TrainConfig.for_resume(ckpt.train_config, args.config, **overrides)
    else:
        train_cfg = TrainConfig.from_json(args.config, **overrides)
    os.makedirs(args.out, exist_ok=True)

    with T.default_dtype(np.dtype(train_cfg.precision)):
        state = ckpt.to_state()
        if resuming:
            optimizer, start_step, sampler_state = ckpt.optimizer, ckpt.step, ckpt.sampler_state
            logger.info(f"Resuming {stage} fine-tuning at step {start_step} (seed {train_cfg.seed})")
        else:
            optimizer, start_step, sampler_state = None, 0, None
            logger.info(f"Fine-tuning ({stage}) from {ckpt.stage} checkpoint {args.init_checkpoint}")

        result = run_stage(stage, records, state, vocab, train_cfg, optimizer=optimizer, start_step=start_step,
                           sampler_state=sampler_state, stop_at=args.stop_at, out_dir=args.out)

    checkpoint_path = os.path.join(args.out, train_config.CHECKPOINT_NAME)
    save_checkpoint(checkpoint_path, result.checkpoint(stage, train_cfg.seed, vocab, train_cfg.model_dump()))
    history_dir = os.path.dirname(os.path.abspath(args.init_checkpoint)) if resuming else None
    save_logs(result, args.out, history_dir=history_dir, start_step=start_step)
    return {
        "checkpoint": checkpoint_path,
        "loss_log": os.path.join(args.out, train_config.LOSS_LOG_NAME),
        "seed": train_cfg.seed,
    }
