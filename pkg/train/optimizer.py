# train/optimizer.py
"""AdamW with decoupled weight decay, global-norm clipping and a warmup/decay schedule."""
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from src.exceptions import ConfigError, NumericError
from .config import OptimizerConfig


def lr_at(step: int, cfg: OptimizerConfig) -> float:
    """0 -> peak over warmup_steps, then linearly to 0 at total_steps; 0 afterwards."""
    if step < 0:
        raise ConfigError(f"step must be nonnegative, got {step}")
    if step < cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps
    decay_span = cfg.total_steps - cfg.warmup_steps
    if decay_span <= 0:
        return cfg.peak_lr if step == cfg.warmup_steps else 0.0
    remaining = (cfg.total_steps - step) / decay_span
    return cfg.peak_lr * min(1.0, max(0.0, remaining))


@dataclass
class AdamWState:
    """First and second moments per parameter name, and the number of updates taken."""

    m: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    v: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamWState":
        return cls(
            m=OrderedDict((name, np.zeros_like(p.data)) for name, p in params.items()),
            v=OrderedDict((name, np.zeros_like(p.data)) for name, p in params.items()),
        )


def check_gradients(params: dict) -> None:
    for name, p in params.items():
        if p.grad is None:
            raise ConfigError(f"parameter '{name}' has no gradient; run backward with inputs=parameters")
        if not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient in '{name}'")


def global_grad_norm(params: dict) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(p.grad, dtype=np.float64))) for p in params.values())))


def clip_grad_norm(params: dict, max_norm: float) -> float:
    """Rescales all gradients in place so their joint L2 norm is at most `max_norm`; returns the norm before clipping."""
    norm = global_grad_norm(params)
    if max_norm is not None and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params.values():
            p.grad = (p.grad * scale).astype(p.grad.dtype)
    return norm


def adamw_step(params: dict, state: AdamWState, cfg: OptimizerConfig) -> float:
    """
    One in-place update of every parameter in `params` (name -> Tensor with .grad).

    Uses the 1-based update count t for bias correction and lr_at(t) as the step
    size. Returns the gradient norm measured before clipping.
    """
    check_gradients(params)
    grad_norm = clip_grad_norm(params, cfg.clip_norm)
    state.step += 1
    t = state.step
    lr = lr_at(t, cfg)
    correction1 = 1.0 - cfg.beta1 ** t
    correction2 = 1.0 - cfg.beta2 ** t
    for name, p in params.items():
        g = p.grad
        m = state.m[name] = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        v = state.v[name] = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g * g
        update = (m / correction1) / (np.sqrt(v / correction2) + cfg.eps)
        p.data = (p.data - lr * cfg.weight_decay * p.data - lr * update).astype(p.data.dtype)
    return grad_norm
