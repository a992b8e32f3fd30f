# src/model/alibi.py
"""
Per-head ALiBi slopes and the attention-bias matrices built from them.

Heads are indexed i = 1..n. With a = 2^floor(log2 n) and b = 2^(-8 / 2^ceil(log2 n)):
    m_i = b^(2i)           for i < a
    m_i = b^(1 + 2(i - a)) for i >= a
`canonical=True` switches to the geometric recipe of the original causal ALiBi
(2^(-8i/n) for powers of two, interleaved for other head counts).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from src import config
from src.exceptions import ConfigError, ShapeError

Variant = Literal["encoder", "causal"]


@dataclass(frozen=True)
class AlibiSlopes:
    m: tuple
    n: int
    a: float
    b: float

    def as_array(self) -> np.ndarray:
        return np.asarray(self.m, dtype=np.float64)


@dataclass(frozen=True)
class AttentionBias:
    matrix: np.ndarray  # (heads, seq_len, seq_len)
    variant: str

    @property
    def seq_len(self) -> int:
        return self.matrix.shape[-1]


def _floor_log2(n: int) -> int:
    return n.bit_length() - 1


def _ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


def _canonical_slopes(n: int) -> list:
    def power_of_two(count: int) -> list:
        return [2.0 ** (-8.0 * i / count) for i in range(1, count + 1)]

    closest = 1 << _floor_log2(n)
    slopes = power_of_two(closest)
    if closest != n:
        slopes += power_of_two(2 * closest)[0::2][: n - closest]
    return slopes


def compute_slopes(n: int, canonical: bool = False) -> AlibiSlopes:
    if n < 1:
        raise ConfigError(f"ALiBi needs at least one head, got {n}")
    a = 2 ** _floor_log2(n)
    denominator = 2 ** _ceil_log2(n)
    b = 2.0 ** (-8.0 / denominator)
    if canonical:
        m = _canonical_slopes(n)
    else:
        # One rounding per slope: b^e == 2^(-8e / denominator).
        exponents = [2 * i if i < a else 1 + 2 * (i - a) for i in range(1, n + 1)]
        m = [2.0 ** (-8.0 * e / denominator) for e in exponents]
    return AlibiSlopes(m=tuple(m), n=n, a=float(a), b=b)


def build_bias(slopes: AlibiSlopes, seq_len: int, variant: Variant = "encoder") -> AttentionBias:
    """
    encoder: bias[h, i, j] = -m_h * |i - j|
    causal:  bias[h, i, j] = -m_h * (i - j) for j <= i, MASK_PENALTY for j > i
    """
    if seq_len < 1:
        raise ShapeError(f"seq_len must be positive, got {seq_len}")
    positions = np.arange(seq_len)
    offset = positions[:, None] - positions[None, :]  # i - j
    m = slopes.as_array()[:, None, None]
    if variant == "encoder":
        matrix = -m * np.abs(offset)[None]
    elif variant == "causal":
        matrix = -m * offset[None].astype(np.float64)
        matrix = np.where(offset[None] < 0, config.MASK_PENALTY, matrix)
    else:
        raise ConfigError(f"Unknown ALiBi variant '{variant}'")
    return AttentionBias(matrix=matrix, variant=variant)
