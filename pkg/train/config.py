# train/config.py
import json
import os
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src import config as main_config
from src.exceptions import ConfigError, UsageError
from src.model.config import ModelConfig, preset

# --- Output artifacts ---
CHECKPOINT_NAME = "checkpoint.jbrt"
LOSS_LOG_NAME = "loss_log.csv"
EVAL_LOG_NAME = "eval_log.csv"
MANIFEST_NAME = "manifest.json"

# --- Desk-scale defaults ---
BATCH_SIZE = 32
TOTAL_STEPS = 2000
WARMUP_STEPS = 200
PEAK_LR = 1e-3
CLIP_NORM = 1.0

# randomness purposes, mixed into per-step seeds
PURPOSE_MASKING = 1
PURPOSE_DROPOUT = 2

Stage = Literal["pretrain", "pairs", "triplets"]


class OptimizerConfig(BaseModel):
    """AdamW with linear warmup to `peak_lr` and linear decay to zero at `total_steps`."""

    beta1: float = Field(0.9, gt=0.0, lt=1.0)
    beta2: float = Field(0.98, gt=0.0, lt=1.0)
    eps: float = Field(1e-6, gt=0.0)
    weight_decay: float = Field(0.01, ge=0.0)
    peak_lr: float = Field(PEAK_LR, gt=0.0)
    warmup_steps: int = Field(WARMUP_STEPS, ge=0)
    total_steps: int = Field(TOTAL_STEPS, ge=1)
    clip_norm: Optional[float] = Field(CLIP_NORM, gt=0.0)  # None disables clipping

    @model_validator(mode="after")
    def _check_schedule(self) -> "OptimizerConfig":
        if self.warmup_steps > self.total_steps:
            raise ValueError(f"warmup_steps ({self.warmup_steps}) exceeds total_steps ({self.total_steps})")
        return self


# Peak learning rates per model size, 10k warmup, 100k steps, batch 4096.
OPTIMIZER_PRESETS = {
    "reference-small": dict(peak_lr=1e-3, warmup_steps=10_000, total_steps=100_000),
    "reference-base": dict(peak_lr=6e-4, warmup_steps=10_000, total_steps=100_000),
    "reference-large": dict(peak_lr=4e-4, warmup_steps=10_000, total_steps=100_000),
    "desk": dict(peak_lr=PEAK_LR, warmup_steps=WARMUP_STEPS, total_steps=TOTAL_STEPS),
}


class TrainConfig(BaseModel):
    """One training run: the JSON document passed as --config."""

    model_config = ConfigDict(protected_namespaces=())

    model_preset: str = "tiny"
    model: dict = Field(default_factory=dict)  # overrides on top of the preset
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    batch_size: int = Field(BATCH_SIZE, ge=1)
    train_seq_len: int = Field(main_config.TRAIN_SEQ_LEN, ge=2)
    mask_rate: float = Field(main_config.MLM_MASK_RATE, gt=0.0, le=1.0)
    temperature: float = Field(main_config.TEMPERATURE, gt=0.0)
    source_weights: Optional[dict] = None
    seed: int = 0
    precision: Literal["float32", "float64"] = "float32"
    log_every: int = Field(50, ge=1)
    eval_every: int = Field(0, ge=0)  # 0 disables periodic evaluation
    checkpoint_every: int = Field(0, ge=0)

    def model_config_for(self, vocab_size: Optional[int] = None) -> ModelConfig:
        overrides = dict(self.model)
        if vocab_size is not None:
            overrides["vocab_size"] = vocab_size
        return preset(self.model_preset, **overrides)

    @classmethod
    def build(cls, **fields) -> "TrainConfig":
        try:
            return cls(**fields)
        except ValidationError as e:
            raise ConfigError(f"Invalid training configuration: {e}") from e

    @staticmethod
    def _document(path: Optional[str], overrides: dict) -> tuple:
        """Top-level fields and optimizer fields requested by a run document plus non-None overrides."""
        fields = {}
        if path is not None:
            if not os.path.exists(path):
                raise ConfigError(f"Config file not found: {path}")
            try:
                with open(path, "r", encoding="utf-8") as f:
                    fields = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON: {e}") from e
        optimizer = dict(fields.pop("optimizer", {}) or {})
        if "optimizer_preset" in fields:
            name = fields.pop("optimizer_preset")
            if name not in OPTIMIZER_PRESETS:
                raise ConfigError(f"Unknown optimizer preset '{name}'. Available: {sorted(OPTIMIZER_PRESETS)}")
            optimizer = {**OPTIMIZER_PRESETS[name], **optimizer}
        for key, value in overrides.items():
            if value is None:
                continue
            if key in OptimizerConfig.model_fields:
                optimizer[key] = value
            else:
                fields[key] = value
        return fields, optimizer

    @classmethod
    def from_json(cls, path: Optional[str], **overrides) -> "TrainConfig":
        """Reads the run document (or starts from defaults when `path` is None); non-None overrides win."""
        fields, optimizer = cls._document(path, overrides)
        return cls.build(**{**fields, "optimizer": optimizer})

    @classmethod
    def for_resume(cls, stored: Optional[dict], path: Optional[str], **overrides) -> "TrainConfig":
        """
        The configuration a checkpoint was trained with. Keys named by the run
        document or a non-None override must agree with it; a resumed run keeps its
        seed, schedule and batch layout.
        """
        if stored is None:
            raise UsageError("checkpoint carries no training configuration and cannot be resumed")
        resumed = cls.build(**stored)
        fields, optimizer = cls._document(path, overrides)
        requested = cls.build(**{**resumed.model_dump(), **fields,
                                 "optimizer": {**resumed.optimizer.model_dump(), **optimizer}})
        conflicts = [f"{key}={getattr(requested, key)!r} (checkpoint has {getattr(resumed, key)!r})"
                     for key in fields
                     if key in cls.model_fields and getattr(requested, key) != getattr(resumed, key)]
        conflicts += [f"optimizer.{key}={getattr(requested.optimizer, key)!r} "
                      f"(checkpoint has {getattr(resumed.optimizer, key)!r})"
                      for key in optimizer if getattr(requested.optimizer, key) != getattr(resumed.optimizer, key)]
        if conflicts:
            raise UsageError("cannot resume with a different configuration: " + ", ".join(conflicts))
        return resumed

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)
