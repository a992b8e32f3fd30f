# src/model/encoder.py
"""
BERT-style encoder without positional embeddings.

Each block is post-layer-norm: x = LN(x + attention(x)); x = LN(x + glu(x)).
Attention scores are QK^T / sqrt(head_dim) + ALiBi bias + padding penalty.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import truncnorm

from src import config as main_config
from src.core import tensor as T
from src.core.tensor import Tensor
from src.exceptions import ConfigError, ShapeError
from src.model.alibi import AlibiSlopes, build_bias, compute_slopes
from src.model.config import ModelConfig


def parameter_shapes(config: ModelConfig) -> "OrderedDict[str, tuple]":
    """Name -> shape of every weight tensor, in initialization order."""
    d, f, v = config.hidden, config.ffn_inner, config.vocab_size
    shapes = OrderedDict()
    shapes["embeddings.word_embeddings"] = (v, d)
    if config.position_embedding == "learned":
        shapes["embeddings.position_embeddings"] = (config.max_position_embeddings, d)
    shapes["embeddings.layer_norm.gain"] = (d,)
    shapes["embeddings.layer_norm.bias"] = (d,)
    for i in range(config.layers):
        prefix = f"layers.{i}"
        for proj in ("query", "key", "value", "output"):
            shapes[f"{prefix}.attention.{proj}.weight"] = (d, d)
            shapes[f"{prefix}.attention.{proj}.bias"] = (d,)
        shapes[f"{prefix}.attention.layer_norm.gain"] = (d,)
        shapes[f"{prefix}.attention.layer_norm.bias"] = (d,)
        shapes[f"{prefix}.mlp.gate.weight"] = (d, f)
        shapes[f"{prefix}.mlp.gate.bias"] = (f,)
        shapes[f"{prefix}.mlp.value.weight"] = (d, f)
        shapes[f"{prefix}.mlp.value.bias"] = (f,)
        shapes[f"{prefix}.mlp.output.weight"] = (f, d)
        shapes[f"{prefix}.mlp.output.bias"] = (d,)
        shapes[f"{prefix}.mlp.layer_norm.gain"] = (d,)
        shapes[f"{prefix}.mlp.layer_norm.bias"] = (d,)
    shapes["mlm_head.transform.weight"] = (d, d)
    shapes["mlm_head.transform.bias"] = (d,)
    shapes["mlm_head.layer_norm.gain"] = (d,)
    shapes["mlm_head.layer_norm.bias"] = (d,)
    if not config.tie_mlm_head:
        shapes["mlm_head.decoder.weight"] = (v, d)
    shapes["mlm_head.decoder.bias"] = (v,)
    return shapes


def count_parameters(config: ModelConfig) -> int:
    return int(sum(np.prod(shape) for shape in parameter_shapes(config).values()))


@dataclass
class EncoderState:
    config: ModelConfig
    params: "OrderedDict[str, Tensor]"
    _slopes: Optional[AlibiSlopes] = field(default=None, repr=False)

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def parameters(self) -> list:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    @property
    def slopes(self) -> AlibiSlopes:
        if self._slopes is None:
            self._slopes = compute_slopes(self.config.heads, canonical=self.config.canonical_alibi_slopes)
        return self._slopes

    def state_arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, p.data) for name, p in self.params.items())

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: dict) -> "EncoderState":
        expected = parameter_shapes(config)
        missing = set(expected) - set(arrays)
        if missing:
            raise ShapeError(f"Missing weight tensors: {sorted(missing)[:5]}")
        params = OrderedDict()
        for name, shape in expected.items():
            if tuple(arrays[name].shape) != shape:
                raise ShapeError(f"Weight '{name}' has shape {arrays[name].shape}, expected {shape}")
            params[name] = T.parameter(np.array(arrays[name]))
        return cls(config=config, params=params)


def init_model(config: ModelConfig, seed: int) -> EncoderState:
    """Truncated-normal weights (std `init_std`, cut at 2 std), unit gains, zero biases."""
    if config.heads * config.head_dim != config.hidden:
        raise ShapeError(f"heads x head_dim != hidden ({config.heads} x {config.head_dim} != {config.hidden})")
    rng = np.random.default_rng(seed)
    params = OrderedDict()
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".gain"):
            values = np.ones(shape)
        elif name.endswith(".bias"):
            values = np.zeros(shape)
        else:
            values = truncnorm.rvs(-2.0, 2.0, loc=0.0, scale=config.init_std, size=shape, random_state=rng)
        params[name] = T.parameter(values)
    return EncoderState(config=config, params=params)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return x @ weight + bias


def padding_penalty(attention_mask: np.ndarray) -> np.ndarray:
    """(B, L) 0/1 mask -> (B, 1, 1, L) additive penalty on padded keys."""
    mask = np.asarray(attention_mask)
    return np.where(mask[:, None, None, :] > 0, 0.0, main_config.MASK_PENALTY)


def attention_block(state: EncoderState, layer: int, x: Tensor, bias: np.ndarray, mask: np.ndarray,
                    training: bool = False, rng: Optional[np.random.Generator] = None,
                    return_probs: bool = False):
    """
    Multi-head self-attention with an additive bias, then residual add and layer norm.

    `x` is (B, L, hidden); `bias` is the (H, L, L) ALiBi matrix (or None for no
    positional bias); `mask` is the (B, L) attention mask.
    """
    cfg = state.config
    p = state.params
    prefix = f"layers.{layer}.attention"
    batch, length, hidden = x.shape
    heads, head_dim = cfg.heads, cfg.head_dim
    if bias is not None and bias.shape != (heads, length, length):
        raise ShapeError(f"attention bias has shape {bias.shape}, expected {(heads, length, length)}")

    def split_heads(t: Tensor) -> Tensor:
        return t.reshape(batch, length, heads, head_dim).transpose(0, 2, 1, 3)

    q = split_heads(linear(x, p[f"{prefix}.query.weight"], p[f"{prefix}.query.bias"]))
    k = split_heads(linear(x, p[f"{prefix}.key.weight"], p[f"{prefix}.key.bias"]))
    v = split_heads(linear(x, p[f"{prefix}.value.weight"], p[f"{prefix}.value.bias"]))

    scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(head_dim))
    additive = padding_penalty(mask)
    if bias is not None:
        additive = additive + bias[None]
    probs = T.softmax(scores + additive, axis=-1)
    context = T.dropout(probs, cfg.attention_dropout, rng, training) @ v
    context = context.transpose(0, 2, 1, 3).reshape(batch, length, hidden)

    out = linear(context, p[f"{prefix}.output.weight"], p[f"{prefix}.output.bias"])
    out = T.dropout(out, cfg.dropout, rng, training)
    out = T.layer_norm(x + out, p[f"{prefix}.layer_norm.gain"], p[f"{prefix}.layer_norm.bias"], cfg.layer_norm_eps)
    return (out, probs) if return_probs else out


def glu_feedforward(state: EncoderState, layer: int, x: Tensor, variant: Optional[str] = None,
                    training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
    """out = W_out(act(W_gate x) * (W_val x)); act is GELU for geglu, ReLU for reglu."""
    cfg = state.config
    variant = variant or cfg.glu_variant
    if variant != cfg.glu_variant:
        raise ConfigError(f"GLU variant '{variant}' does not match the model's '{cfg.glu_variant}'")
    p = state.params
    prefix = f"layers.{layer}.mlp"
    gate = linear(x, p[f"{prefix}.gate.weight"], p[f"{prefix}.gate.bias"])
    value = linear(x, p[f"{prefix}.value.weight"], p[f"{prefix}.value.bias"])
    activated = T.gelu(gate) if variant == "geglu" else T.relu(gate)
    out = linear(activated * value, p[f"{prefix}.output.weight"], p[f"{prefix}.output.bias"])
    out = T.dropout(out, cfg.dropout, rng, training)
    return T.layer_norm(x + out, p[f"{prefix}.layer_norm.gain"], p[f"{prefix}.layer_norm.bias"], cfg.layer_norm_eps)


def embed(state: EncoderState, input_ids: np.ndarray, training: bool = False,
          rng: Optional[np.random.Generator] = None) -> Tensor:
    cfg = state.config
    p = state.params
    input_ids = np.asarray(input_ids, dtype=np.int64)
    if input_ids.size and (input_ids.min() < 0 or input_ids.max() >= cfg.vocab_size):
        raise ShapeError(
            f"token id out of range [0, {cfg.vocab_size}): min={input_ids.min()}, max={input_ids.max()}"
        )
    x = T.gather_rows(p["embeddings.word_embeddings"], input_ids)
    if cfg.position_embedding == "learned":
        length = input_ids.shape[-1]
        if length > cfg.max_position_embeddings:
            raise ShapeError(
                f"sequence length {length} exceeds the learned position table ({cfg.max_position_embeddings})"
            )
        x = x + T.gather_rows(p["embeddings.position_embeddings"], np.arange(length))
    x = T.layer_norm(x, p["embeddings.layer_norm.gain"], p["embeddings.layer_norm.bias"], cfg.layer_norm_eps)
    return T.dropout(x, cfg.dropout, rng, training)


def forward(state: EncoderState, batch, training: bool = False,
            rng: Optional[np.random.Generator] = None) -> Tensor:
    """
    Encodes a padded batch (anything with `input_ids` and `attention_mask`) to (B, L, hidden).

    No table is indexed by absolute position unless the learned-position baseline
    is configured, so any length that fits in memory is accepted.
    """
    cfg = state.config
    input_ids = np.atleast_2d(np.asarray(batch.input_ids))
    mask = np.atleast_2d(np.asarray(batch.attention_mask))
    if input_ids.shape != mask.shape:
        raise ShapeError(f"input_ids {input_ids.shape} and attention_mask {mask.shape} disagree")
    length = input_ids.shape[1]

    bias = None
    if cfg.position_embedding == "alibi":
        bias = build_bias(state.slopes, length, cfg.alibi_variant).matrix
    x = embed(state, input_ids, training, rng)
    for layer in range(cfg.layers):
        x = attention_block(state, layer, x, bias, mask, training, rng)
        x = glu_feedforward(state, layer, x, training=training, rng=rng)
    return x


def mlm_head(state: EncoderState, hidden: Tensor) -> Tensor:
    """
    Vocabulary logits for selected hidden states (n, hidden) -> (n, |V|).

    dense -> GELU -> layer norm -> decoder; the decoder reuses the word-embedding
    table unless `tie_mlm_head` is off.
    """
    cfg = state.config
    p = state.params
    x = T.gelu(linear(hidden, p["mlm_head.transform.weight"], p["mlm_head.transform.bias"]))
    x = T.layer_norm(x, p["mlm_head.layer_norm.gain"], p["mlm_head.layer_norm.bias"], cfg.layer_norm_eps)
    if cfg.tie_mlm_head:
        decoder = p["embeddings.word_embeddings"].transpose(1, 0)
    else:
        decoder = p["mlm_head.decoder.weight"].transpose(1, 0)
    return x @ decoder + p["mlm_head.decoder.bias"]
