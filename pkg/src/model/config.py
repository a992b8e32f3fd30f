# src/model/config.py

from typing import Literal, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from src import config as main_config
from src.exceptions import ConfigError


class ModelConfig(BaseModel):
    """Architecture hyperparameters of the encoder."""

    layers: int = Field(..., ge=1)
    hidden: int = Field(..., ge=1)
    heads: int = Field(..., ge=1)
    head_dim: int = Field(main_config.HEAD_DIM, ge=1)
    ffn_inner: Optional[int] = Field(None, ge=1)  # defaults to 4 x hidden
    glu_variant: Literal["geglu", "reglu"] = "geglu"
    vocab_size: int = Field(main_config.DEFAULT_VOCAB_SIZE, ge=1)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    attention_dropout: float = Field(0.1, ge=0.0, lt=1.0)
    alibi_variant: Literal["encoder", "causal"] = "encoder"
    canonical_alibi_slopes: bool = False
    tie_mlm_head: bool = True
    position_embedding: Literal["alibi", "learned"] = "alibi"
    max_position_embeddings: int = Field(512, ge=1)
    layer_norm_eps: float = Field(main_config.LAYER_NORM_EPS, gt=0.0)
    init_std: float = Field(main_config.INIT_STD, gt=0.0)
    pool_special_tokens: bool = True

    @model_validator(mode="after")
    def _check_geometry(self) -> "ModelConfig":
        if self.heads * self.head_dim != self.hidden:
            raise ValueError(
                f"heads x head_dim must equal hidden: {self.heads} x {self.head_dim} != {self.hidden}"
            )
        if self.ffn_inner is None:
            self.ffn_inner = 4 * self.hidden
        return self

    @classmethod
    def build(cls, **fields) -> "ModelConfig":
        """Validates `fields`, raising ConfigError instead of pydantic's ValidationError."""
        try:
            return cls(**fields)
        except ValidationError as e:
            raise ConfigError(f"Invalid model configuration: {e}") from e


# Full-scale presets keep a head dimension of 64.
PRESETS = {
    "small": dict(layers=4, hidden=512, heads=8, glu_variant="geglu"),
    "base": dict(layers=12, hidden=768, heads=12, glu_variant="geglu"),
    "large": dict(layers=24, hidden=1024, heads=16, glu_variant="reglu"),
    # desk scale
    "tiny": dict(layers=2, hidden=128, heads=2, vocab_size=1000),
    "mini": dict(layers=4, hidden=256, heads=4, vocab_size=8000),
}

REFERENCE_PARAMETER_COUNTS = {"small": 33e6, "base": 137e6, "large": 455e6}


def preset(name: str, **overrides) -> ModelConfig:
    if name not in PRESETS:
        raise ConfigError(f"Unknown model preset '{name}'. Available: {sorted(PRESETS)}")
    return ModelConfig.build(**{**PRESETS[name], **overrides})
