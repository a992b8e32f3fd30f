# scripts/manifest.py
import os
from datetime import datetime, timezone
from typing import Optional

from pydantic import BaseModel, Field, ValidationError

from src import config as main_config
from src.data_pipeline.io_utils import atomic_write
from src.exceptions import DataError
from src.logger import logger
from train import config as train_config


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunManifest(BaseModel):
    """Everything needed to replay a command: its argument vector plus what it read and wrote."""

    command: str
    argv: list[str]
    config_path: Optional[str] = None
    data_paths: dict = Field(default_factory=dict)
    seed: Optional[int] = None
    output_dir: str
    outputs: dict = Field(default_factory=dict)
    version: str = main_config.VERSION
    started_at: str = Field(default_factory=_now)
    finished_at: Optional[str] = None

    def finish(self, outputs: dict) -> "RunManifest":
        self.outputs = {k: v for k, v in outputs.items() if v is not None}
        self.finished_at = _now()
        return self

    def save(self, path: Optional[str] = None) -> str:
        path = path or os.path.join(self.output_dir, train_config.MANIFEST_NAME)
        with atomic_write(path, "w", encoding="utf-8") as f:
            f.write(self.model_dump_json(indent=2))
        logger.info(f"Run manifest saved to {path}")
        return path


def load_manifest(path: str) -> RunManifest:
    if not os.path.exists(path):
        raise DataError(f"Manifest not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        payload = f.read()
    try:
        return RunManifest.model_validate_json(payload)
    except ValidationError as e:
        raise DataError(f"{path} is not a valid run manifest: {e}") from e
