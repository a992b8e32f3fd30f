# main.py
"""
Command-line entry point.

    python main.py pretrain --corpus corpus.jsonl --vocab vocab.txt --out runs/pretrain
    python main.py finetune --stage pairs --data pairs.jsonl --init-checkpoint runs/pretrain/checkpoint.jbrt ...
    python main.py embed --checkpoint ... --input docs.jsonl --output docs.jev
    python main.py eval --task mlm-sweep --checkpoint ... --corpus held_out.jsonl --lengths 64 128 256 512
    python main.py eval --task retrieval --run runs/eval/run_512.tsv --qrels qrels.tsv --out runs/rescored
    python main.py replay --manifest runs/pretrain/manifest.json
    python main.py report --run-dir runs/eval

Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numeric failure.
"""
import argparse
import os
import sys

from dotenv import load_dotenv

from reports.generate_summary import generate_report
from scripts.embed import EMBED_FORMATS, run_embed
from scripts.evaluate import EVAL_TASKS, run_eval
from scripts.finetune import FINETUNE_STAGES, run_finetune
from scripts.manifest import RunManifest, load_manifest
from scripts.pretrain import run_pretrain
from src import config as main_config
from src.exceptions import AlibiEmbedError, ConfigError, NumericError, UsageError
from src.logger import logger, run_log

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

COMMANDS = {
    "pretrain": run_pretrain,
    "finetune": run_finetune,
    "embed": run_embed,
    "eval": run_eval,
}
PATH_ARGUMENTS = (
    "corpus", "data", "vocab", "init_checkpoint", "checkpoint", "input", "queries", "qrels", "run", "resume",
)


class ArgumentParser(argparse.ArgumentParser):
    """Raises UsageError instead of exiting, so main() owns the exit code."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _sequence_length(value: str) -> int:
    length = int(value)
    if length < 2:
        raise argparse.ArgumentTypeError(f"must leave room for [CLS] and [SEP], got {length}")
    return length


def _positive(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {number}")
    return number


def _add_training_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Run configuration JSON; flags below override its keys.")
    parser.add_argument("--vocab", required=True, help="WordPiece vocabulary, one token per line.")
    parser.add_argument("--out", required=True, help="Output directory.")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--steps", type=_positive, help="Total optimizer steps.")
    parser.add_argument("--batch-size", type=_positive)
    parser.add_argument("--train-seq-len", type=_sequence_length)
    parser.add_argument("--precision", choices=("float32", "float64"))
    parser.add_argument("--stop-at", type=_positive, help="Stop after this step, leaving a resumable checkpoint.")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="alibi-embed", description=f"{main_config.APP_NAME} {main_config.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    pretrain = sub.add_parser("pretrain", help="Whole-word masked language model pretraining.")
    pretrain.add_argument("--corpus", required=True, help="JSON-lines corpus of {id, text} records.")
    pretrain.add_argument("--resume", help="Checkpoint to continue from.")
    _add_training_arguments(pretrain)

    finetune = sub.add_parser("finetune", help="Contrastive fine-tuning on pairs or hard-negative triplets.")
    finetune.add_argument("--stage", required=True, choices=FINETUNE_STAGES)
    finetune.add_argument("--data", required=True, help="JSON-lines pair or triplet records.")
    finetune.add_argument("--init-checkpoint", required=True)
    finetune.add_argument("--temperature", type=float)
    finetune.add_argument("--resume", action="store_true",
                          help="Continue the step counter, moments and sampler of a same-stage init checkpoint.")
    _add_training_arguments(finetune)

    embed = sub.add_parser("embed", help="Encode texts into fixed-size vectors.")
    embed.add_argument("--checkpoint", required=True)
    embed.add_argument("--vocab", required=True)
    embed.add_argument("--input", required=True, help="JSON-lines {id, text} records.")
    embed.add_argument("--output", required=True)
    embed.add_argument("--max-len", type=_sequence_length, default=main_config.TRAIN_SEQ_LEN)
    embed.add_argument("--format", choices=EMBED_FORMATS, default="bin")

    evaluate = sub.add_parser("eval", help="Evaluate a checkpoint at one or more maximum sequence lengths.")
    evaluate.add_argument("--task", required=True, choices=EVAL_TASKS)
    evaluate.add_argument("--checkpoint", help="Required unless --run is given.")
    evaluate.add_argument("--vocab", help="Required unless --run is given.")
    evaluate.add_argument("--corpus", help="Documents (mlm-sweep, retrieval).")
    evaluate.add_argument("--queries", help="Queries (retrieval).")
    evaluate.add_argument("--qrels", help="Relevance judgements (retrieval).")
    evaluate.add_argument("--run", help="Score this saved run file (retrieval) instead of encoding.")
    evaluate.add_argument("--data", help="Labelled, scored-pair or rerank records.")
    evaluate.add_argument("--lengths", type=_sequence_length, nargs="+")
    evaluate.add_argument("--seed", type=int, default=main_config.EVAL_SEED)
    evaluate.add_argument("--out", required=True)
    evaluate.add_argument("--plot", action="store_true", help="Also render the sweep figure.")

    replay = sub.add_parser("replay", help="Re-run a command from its manifest.")
    replay.add_argument("--manifest", required=True)

    report = sub.add_parser("report", help="Summarize the CSV artifacts of a run directory as Markdown.")
    report.add_argument("--run-dir", required=True)
    return parser


def _output_dir(args) -> str:
    if args.command == "embed":
        return os.path.dirname(os.path.abspath(args.output))
    return args.out


def _manifest_for(args, argv: list) -> RunManifest:
    return RunManifest(
        command=args.command,
        argv=list(argv),
        config_path=getattr(args, "config", None),
        data_paths={name: getattr(args, name) for name in PATH_ARGUMENTS if isinstance(getattr(args, name, None), str)},
        seed=getattr(args, "seed", None),
        output_dir=_output_dir(args),
    )


def dispatch(args, argv: list) -> None:
    if args.command == "replay":
        manifest = load_manifest(args.manifest)
        logger.info(f"Replaying '{manifest.command}' recorded at {manifest.started_at}")
        dispatch(build_parser().parse_args(manifest.argv), manifest.argv)
        return
    if args.command == "report":
        generate_report(args.run_dir)
        return

    manifest = _manifest_for(args, argv)
    with run_log(manifest.output_dir):
        logger.info(f"--- Starting {args.command} ---")
        outputs = COMMANDS[args.command](args)
        manifest.finish(outputs).save()
        logger.info(f"✅ {args.command} finished.")


def main(argv=None) -> int:
    load_dotenv()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        dispatch(build_parser().parse_args(argv), argv)
    except (UsageError, ConfigError) as e:
        logger.error(f"❌ {e}")
        return EXIT_USAGE
    except NumericError as e:
        logger.error(f"❌ Numeric failure: {e}")
        return EXIT_NUMERIC
    except AlibiEmbedError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
