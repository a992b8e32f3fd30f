# scripts/evaluate.py
import os
import sys

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.append(project_root)

import pandas as pd

from reports.generate_summary import PLOT_NAME, SWEEP_NAME, plot_sweep
from src.data_pipeline.io_utils import write_csv
from src.data_pipeline.loader import load_jsonl, load_qrels, load_run
from src.data_pipeline.schemas import (CorpusRecord, LabeledTextRecord, QueryRecord, RerankRecord,
                                       ScoredPairRecord)
from src.data_pipeline.tokenizer import load_vocab
from src.evaluation.sweep import length_sweep, save_sweep
from src.evaluation.tasks import (ClassificationTask, ClusterTask, MlmTask, PairClassificationTask,
                                  RerankingTask, RetrievalTask, StsTask, run_path, score_run, split_labelled)
from src.exceptions import DataError, UsageError
from src.logger import logger
from train.checkpoint import load_encoder

EVAL_TASKS = ("mlm-sweep", "retrieval", "cluster", "sts", "classification", "pair-classification", "rerank")
DEFAULT_LENGTHS = (64, 128, 256, 512)
RUN_SCORES_NAME = "run_scores.csv"


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if not getattr(args, n, None)]
    if missing:
        logger.error(f"❌ Task '{args.task}' needs {', '.join(missing)}")
        raise DataError(f"task '{args.task}' needs {', '.join(missing)}")


def _load_judgements(path: str) -> dict:
    qrels = load_qrels(path)
    if not qrels:
        raise DataError(f"{path} has no relevance judgements")
    return qrels


def build_task(args):
    """Loads the inputs of `args.task` and wraps them in the matching evaluation task."""
    if args.task == "mlm-sweep":
        _require(args, "corpus")
        return MlmTask(load_jsonl(args.corpus, CorpusRecord), seed=args.seed)
    if args.task == "retrieval":
        _require(args, "corpus", "queries", "qrels")
        qrels = _load_judgements(args.qrels)
        return RetrievalTask(load_jsonl(args.corpus, CorpusRecord), load_jsonl(args.queries, QueryRecord), qrels,
                             run_dir=args.out)

    _require(args, "data")
    if args.task == "cluster":
        return ClusterTask(load_jsonl(args.data, LabeledTextRecord), seed=args.seed)
    if args.task == "classification":
        train, test = split_labelled(load_jsonl(args.data, LabeledTextRecord), seed=args.seed)
        return ClassificationTask(train, test)
    if args.task == "sts":
        return StsTask(load_jsonl(args.data, ScoredPairRecord))
    if args.task == "pair-classification":
        return PairClassificationTask(load_jsonl(args.data, ScoredPairRecord))
    if args.task == "rerank":
        return RerankingTask(load_jsonl(args.data, RerankRecord))
    raise DataError(f"unknown evaluation task '{args.task}'")


def score_existing_run(args) -> dict:
    """Scores a saved run file against --qrels without loading a model."""
    if args.task != "retrieval":
        raise UsageError(f"--run only applies to --task retrieval, not '{args.task}'")
    _require(args, "qrels")
    qrels = _load_judgements(args.qrels)
    metrics = score_run(load_run(args.run), qrels)

    os.makedirs(args.out, exist_ok=True)
    frame = pd.DataFrame({"metric": list(metrics), "value": list(metrics.values())})
    scores_path = os.path.join(args.out, RUN_SCORES_NAME)
    write_csv(frame, scores_path, index=False)
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    return {"scores": scores_path}


def run_eval(args) -> dict:
    """
    Runs one task at every --lengths value, prints the table and writes sweep.csv
    to --out. Retrieval also saves the ranking of each length as run_<length>.tsv.
    """
    if args.run:
        return score_existing_run(args)
    missing = [flag for flag, value in (("--checkpoint", args.checkpoint), ("--vocab", args.vocab)) if not value]
    if missing:
        raise UsageError(f"eval needs {' and '.join(missing)} unless --run is given")

    vocab = load_vocab(args.vocab)
    state, _ = load_encoder(args.checkpoint, vocab)
    os.makedirs(args.out, exist_ok=True)
    task = build_task(args)
    frame = length_sweep(state, task, args.lengths or DEFAULT_LENGTHS, vocab, show_progress=True)

    sweep_path = os.path.join(args.out, SWEEP_NAME)
    save_sweep(frame, sweep_path)
    wide = frame.pivot(index="length", columns="metric", values="value")
    print(wide.to_string(float_format=lambda v: f"{v:.4f}"))

    outputs = {"sweep": sweep_path}
    if args.task == "retrieval":
        outputs["runs"] = [run_path(args.out, length) for length in sorted(set(frame["length"]))]
    if args.plot:
        outputs["plot"] = plot_sweep(frame, os.path.join(args.out, PLOT_NAME))
    return outputs
