# src/core/gradcheck.py
"""Central finite-difference checks for analytic gradients."""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from src.core.tensor import Tensor, backward


def numerical_gradient(fn: Callable[[], Tensor], tensor: Tensor, h: float = 1e-5,
                       indices: Optional[Sequence[tuple]] = None) -> dict:
    """
    Central differences of the scalar `fn()` w.r.t. entries of `tensor`.

    `tensor.data` is perturbed in place and restored. Returns {index: estimate}
    for every entry, or only for `indices` when given.
    """
    if indices is None:
        indices = list(np.ndindex(tensor.shape))
    estimates = {}
    for index in indices:
        original = tensor.data[index].copy()
        tensor.data[index] = original + h
        plus = float(fn().data)
        tensor.data[index] = original - h
        minus = float(fn().data)
        tensor.data[index] = original
        estimates[index] = (plus - minus) / (2.0 * h)
    return estimates


def max_relative_error(fn: Callable[[], Tensor], tensors: Sequence[Tensor], h: float = 1e-5,
                       samples_per_tensor: Optional[int] = None, seed: int = 0,
                       floor: float = 1e-6) -> float:
    """
    Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over the checked entries.

    With `samples_per_tensor`, a seeded random subset of entries is checked per tensor.
    Meaningful in float64 mode only.
    """
    for t in tensors:
        t.zero_grad()
    loss = fn()
    backward(loss, inputs=tensors)
    analytic = [t.grad.copy() for t in tensors]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, grad in zip(tensors, analytic):
        indices = list(np.ndindex(t.shape))
        if samples_per_tensor is not None and len(indices) > samples_per_tensor:
            chosen = rng.choice(len(indices), size=samples_per_tensor, replace=False)
            indices = [indices[i] for i in chosen]
        for index, estimate in numerical_gradient(fn, t, h, indices).items():
            exact = float(grad[index])
            scale = max(abs(exact), abs(estimate), floor)
            worst = max(worst, abs(exact - estimate) / scale)
    return worst
