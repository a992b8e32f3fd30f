# scripts/pretrain.py
import os
import sys

# Add the project root to the Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.append(project_root)

import numpy as np

from src.core import tensor as T
from src.data_pipeline.loader import load_jsonl
from src.data_pipeline.schemas import CorpusRecord
from src.data_pipeline.tokenizer import load_vocab
from src.logger import logger
from src.model.encoder import init_model
from train import config as train_config
from train.checkpoint import check_vocabulary, load_checkpoint, save_checkpoint
from train.config import TrainConfig
from train.train import run_stage, save_logs


def run_pretrain(args) -> dict:
    """
    Whole-word MLM pretraining. Returns the paths it wrote.

    With --resume the checkpoint's training configuration (seed included) is
    reused; flags that contradict it are usage errors.
    """
    overrides = dict(seed=args.seed, total_steps=args.steps, batch_size=args.batch_size,
                     train_seq_len=args.train_seq_len, precision=args.precision)
    vocab = load_vocab(args.vocab)
    records = load_jsonl(args.corpus, CorpusRecord)
    ckpt = None
    if args.resume:
        ckpt = load_checkpoint(args.resume)
        check_vocabulary(ckpt, vocab, args.resume)
        train_cfg = TrainConfig.for_resume(ckpt.train_config, args.config, **overrides)
    else:
        train_cfg = TrainConfig.from_json(args.config, **overrides)
    os.makedirs(args.out, exist_ok=True)

    with T.default_dtype(np.dtype(train_cfg.precision)):
        if ckpt is not None:
            state, optimizer, start_step = ckpt.to_state(), ckpt.optimizer, ckpt.step
            logger.info(f"Resuming pretraining from {args.resume} at step {start_step} (seed {train_cfg.seed})")
        else:
            model_cfg = train_cfg.model_config_for(vocab_size=len(vocab))
            state = init_model(model_cfg, seed=train_cfg.seed)
            optimizer, start_step = None, 0
            logger.info(f"Initialized '{train_cfg.model_preset}' encoder with {state.num_parameters():,} parameters")

        result = run_stage("pretrain", records, state, vocab, train_cfg, optimizer=optimizer,
                           start_step=start_step, stop_at=args.stop_at, out_dir=args.out)

    checkpoint_path = os.path.join(args.out, train_config.CHECKPOINT_NAME)
    save_checkpoint(checkpoint_path, result.checkpoint("pretrain", train_cfg.seed, vocab, train_cfg.model_dump()))
    save_logs(result, args.out, history_dir=os.path.dirname(os.path.abspath(args.resume)) if ckpt else None,
              start_step=start_step)
    return {
        "checkpoint": checkpoint_path,
        "loss_log": os.path.join(args.out, train_config.LOSS_LOG_NAME),
        "seed": train_cfg.seed,
    }
