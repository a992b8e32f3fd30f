# reports/generate_summary.py

import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

# Add project root to path to allow importing from src and train
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.append(project_root)

from src import config as main_config
from src.exceptions import DataError
from src.logger import logger
from train import config as train_config

SWEEP_NAME = "sweep.csv"
PLOT_NAME = "sweep.png"
REPORT_NAME = "results_summary.md"


def plot_sweep(frame: pd.DataFrame, path: str, metrics=None) -> str:
    """Metric value against maximum sequence length, one line per metric, log-scaled length axis."""
    if metrics is not None:
        frame = frame[frame["metric"].isin(metrics)]
    if frame.empty:
        raise DataError("nothing to plot: the sweep table has no matching rows")
    sns.set_theme(style="whitegrid")
    fig, ax = plt.subplots(figsize=(6, 4))
    sns.lineplot(data=frame, x="length", y="value", hue="metric", marker="o", ax=ax)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("maximum sequence length")
    ax.set_ylabel("score")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info(f"Sweep plot saved to {path}")
    return path


def _markdown_table(frame: pd.DataFrame) -> str:
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    divider = "|" + "---|" * len(frame.columns)
    rows = [
        "| " + " | ".join(f"{v:.4f}" if isinstance(v, float) else str(v) for v in row) + " |"
        for row in frame.itertuples(index=False)
    ]
    return "\n".join([header, divider, *rows])


def summarize_losses(loss_log: pd.DataFrame, window: int = 50) -> dict:
    """First and last loss, and the last `window`-step moving average, per stage."""
    summary = {}
    for stage, group in loss_log.groupby("stage", sort=False):
        summary[stage] = {
            "steps": int(group["step"].max()),
            "first_loss": float(group["loss"].iloc[0]),
            "final_loss": float(group["loss"].iloc[-1]),
            "smoothed_loss": float(group["loss"].tail(window).mean()),
        }
    return summary


def generate_report(run_dir: str) -> str:
    """
    Builds results_summary.md (and sweep.png when a sweep table exists) from the
    CSV artifacts a command wrote to `run_dir`.
    """
    if not os.path.isdir(run_dir):
        logger.error(f"❌ Run directory not found: {run_dir}")
        raise DataError(f"Run directory not found: {run_dir}")
    logger.info(f"Generating results summary for {run_dir}...")
    sections = [f"# Results Summary: {main_config.APP_NAME} {main_config.VERSION}", ""]

    loss_path = os.path.join(run_dir, train_config.LOSS_LOG_NAME)
    if os.path.exists(loss_path):
        stats = summarize_losses(pd.read_csv(loss_path))
        sections += ["## Training", ""]
        table = pd.DataFrame([{"stage": s, **v} for s, v in stats.items()])
        sections += [_markdown_table(table), ""]

    eval_path = os.path.join(run_dir, train_config.EVAL_LOG_NAME)
    if os.path.exists(eval_path):
        sections += ["## Periodic evaluation", "", _markdown_table(pd.read_csv(eval_path)), ""]

    sweep_path = os.path.join(run_dir, SWEEP_NAME)
    if os.path.exists(sweep_path):
        sweep = pd.read_csv(sweep_path)
        wide = sweep.pivot(index="length", columns="metric", values="value").reset_index()
        wide.columns.name = None
        sections += ["## Length sweep", "", _markdown_table(wide), ""]
        plot_sweep(sweep, os.path.join(run_dir, PLOT_NAME))
        sections += [f"![length sweep]({PLOT_NAME})", ""]

    if len(sections) == 2:
        logger.warning(f"⚠️ No CSV artifacts found in {run_dir}; the report is empty.")

    report_path = os.path.join(run_dir, REPORT_NAME)
    with open(report_path, "w", encoding="utf-8") as f:
        f.write("\n".join(sections))
    logger.info(f"Report successfully generated at: {report_path}")
    return report_path


if __name__ == "__main__":
    generate_report(sys.argv[1] if len(sys.argv) > 1 else main_config.OUTPUT_DIR)
