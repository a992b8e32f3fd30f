# src/core/tensor.py
"""
Dense tensors backed by numpy with reverse-mode differentiation.

Every differentiable operation builds its output through `_record`, which stores
the parent tensors and a gradient function mapping the output gradient to one
gradient per parent. `backward` replays those functions in reverse topological
order (see `ComputationTape`) and accumulates into the `grad` of leaf tensors.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from src.exceptions import ConfigError, NumericError, ShapeError

GradFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_SUPPORTED_DTYPES = (np.float32, np.float64)
_default_dtype = np.float32
_grad_enabled = True


# --- Precision and grad mode ---

def get_default_dtype():
    return _default_dtype


def set_default_dtype(dtype) -> None:
    """Switches the global floating-point precision (float32 for training, float64 for gradient checks)."""
    global _default_dtype
    dtype = np.dtype(dtype).type
    if dtype not in _SUPPORTED_DTYPES:
        raise ConfigError(f"Unsupported tensor dtype: {np.dtype(dtype).name}")
    _default_dtype = dtype


@contextlib.contextmanager
def default_dtype(dtype) -> Iterator[None]:
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disables graph recording; used for inference."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


# --- Tensor ---

class Tensor:
    """
    An n-dimensional float array with an optional gradient buffer.

    `grad` is a numpy array of the same shape as `data` once populated by
    `backward`; repeated backward passes accumulate into it until `zero_grad`.
    """

    __array_ufunc__ = None  # numpy operators defer to the Tensor ones

    def __init__(self, data, requires_grad: bool = False, _parents: tuple = (),
                 _grad_fn: Optional[GradFn] = None, _op: str = ""):
        array = np.asarray(data)
        if array.dtype != _default_dtype:
            array = array.astype(_default_dtype)
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents = _parents
        self._grad_fn = _grad_fn
        self._op = _op

    # --- Introspection ---

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._grad_fn is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, inputs: Optional[Iterable["Tensor"]] = None) -> None:
        backward(self, inputs=inputs)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # --- Operators ---

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __neg__(self): return neg(self)
    def __pow__(self, exponent: float): return power(self, exponent)
    def __matmul__(self, other): return matmul(self, other)

    # --- Method forms ---

    def sum(self, axis=None, keepdims: bool = False): return tensor_sum(self, axis, keepdims)
    def mean(self, axis=None, keepdims: bool = False): return mean(self, axis, keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)
    def transpose(self, *axes): return transpose(self, axes[0] if len(axes) == 1 and isinstance(axes[0], (tuple, list)) else (axes or None))
    def exp(self): return exp(self)
    def log(self): return log(self)
    def sqrt(self): return sqrt(self)

    @property
    def T(self): return transpose(self, None)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data) -> Tensor:
    """A trainable leaf."""
    return Tensor(data, requires_grad=True)


def _record(data: np.ndarray, parents: tuple, grad_fn: GradFn, op: str) -> Tensor:
    requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
    if not requires_grad:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=parents, _grad_fn=grad_fn, _op=op)


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sums out the axes numpy broadcasting added so `grad` matches `shape`."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# --- Elementwise arithmetic ---

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data + b.data, (a, b),
                   lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data - b.data, (a, b),
                   lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data * b.data, (a, b),
                   lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return (unbroadcast(g / b.data, a.shape),
                unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _record(a.data / b.data, (a, b), grad_fn, "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _record(-a.data, (a,), lambda g: (-g,), "neg")


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    return _record(a.data ** exponent, (a,),
                   lambda g: (g * exponent * a.data ** (exponent - 1),), "pow")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _record(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


# --- Linear algebra and reductions ---

def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul expects operands of rank >= 2, got shapes {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f"matmul inner extents disagree: {a.shape} @ {b.shape} "
            f"(a.shape[-1]={a.shape[-1]}, b.shape[-2]={b.shape[-2]})"
        )

    def grad_fn(g):
        grad_a = g @ np.swapaxes(b.data, -1, -2)
        grad_b = np.swapaxes(a.data, -1, -2) @ g
        return unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)

    return _record(a.data @ b.data, (a, b), grad_fn, "matmul")


def _expand_reduced(g: np.ndarray, shape: tuple, axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(ax % len(shape) for ax in axes)
        g = np.expand_dims(g, axes)
    return np.ascontiguousarray(np.broadcast_to(g, shape))


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims)
    return _record(np.asarray(out), (a,),
                   lambda g: (_expand_reduced(g, a.shape, axis, keepdims),), "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return tensor_sum(a, axis, keepdims) * (1.0 / count)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _record(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),), "transpose")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return _record(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors),
                   lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


def gather_rows(table, indices) -> Tensor:
    """Looks up rows of a 2-D table; output shape is indices.shape + (table.shape[1],)."""
    table = as_tensor(table)
    indices = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"gather_rows expects a 2-D table, got shape {table.shape}")
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise IndexError(
            f"row index out of range [0, {table.shape[0]}): min={indices.min()}, max={indices.max()}"
        )

    def grad_fn(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, indices.reshape(-1), g.reshape(-1, table.shape[1]))
        return (grad,)

    return _record(table.data[indices], (table,), grad_fn, "gather_rows")


# --- Activations and normalization ---

def relu(x) -> Tensor:
    x = as_tensor(x)
    positive = x.data > 0
    return _record(np.where(positive, x.data, 0).astype(x.dtype), (x,), lambda g: (g * positive,), "relu")


def gelu(x) -> Tensor:
    """Exact GELU, x * Phi(x), with Phi the standard normal CDF."""
    x = as_tensor(x)
    cdf = ndtr(x.data).astype(x.dtype)

    def grad_fn(g):
        pdf = np.exp(-0.5 * x.data * x.data) / np.sqrt(2.0 * np.pi)
        return (g * (cdf + x.data * pdf),)

    return _record(x.data * cdf, (x,), grad_fn, "gelu")


def _check_finite(values: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(values)):
        offending = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
        raise NumericError(f"{op} received a non-finite input at index {offending}")


def softmax(x, axis: int = -1) -> Tensor:
    """Softmax along `axis` (the last one by default), stabilised by max-subtraction."""
    x = as_tensor(x)
    if x.shape[axis] < 1:
        raise ShapeError(f"softmax over an empty axis (shape {x.shape})")
    _check_finite(x.data, "softmax")
    shifted = np.exp(x.data - x.data.max(axis=axis, keepdims=True))
    out = shifted / shifted.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _record(out, (x,), grad_fn, "softmax")


def softmax_lastdim(x) -> Tensor:
    return softmax(x, axis=-1)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    _check_finite(x.data, "log_softmax")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def grad_fn(g):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return _record(out, (x,), grad_fn, "log_softmax")


def layer_norm(x, gain, bias, eps: float = 1e-12) -> Tensor:
    """Normalizes the last axis to zero mean and unit variance, then applies gain and bias."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError(
            f"layer_norm gain/bias must have shape ({width},), got {gain.shape} and {bias.shape}"
        )
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normalized = centered * inv_std
    out = normalized * gain.data + bias.data

    def grad_fn(g):
        grad_norm = g * gain.data
        grad_x = inv_std * (
            grad_norm
            - grad_norm.mean(axis=-1, keepdims=True)
            - normalized * (grad_norm * normalized).mean(axis=-1, keepdims=True)
        )
        reduce_axes = tuple(range(x.ndim - 1))
        return grad_x, (g * normalized).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    return _record(out.astype(x.dtype), (x, gain, bias), grad_fn, "layer_norm")


def dropout(x, rate: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """Inverted dropout; identity when not training or when the rate is zero."""
    x = as_tensor(x)
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs a seeded generator")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return _record(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


# --- Losses ---

def cross_entropy(logits, targets) -> Tensor:
    """Mean negative log-likelihood of integer `targets` under softmax(`logits`) (n x |V|)."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects logits of shape (n, |V|), got {logits.shape}")
    n, vocab = logits.shape
    if targets.shape != (n,):
        raise ShapeError(f"cross_entropy expects {n} targets, got shape {targets.shape}")
    if n == 0:
        raise ShapeError("cross_entropy over zero rows")
    if targets.min() < 0 or targets.max() >= vocab:
        bad = int(targets[(targets < 0) | (targets >= vocab)][0])
        raise ShapeError(f"cross_entropy target {bad} is outside [0, {vocab})")
    _check_finite(logits.data, "cross_entropy")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(n)
    loss = -log_probs[rows, targets].mean()

    def grad_fn(g):
        grad = np.exp(log_probs)
        grad[rows, targets] -= 1.0
        return (grad * (g / n),)

    return _record(np.asarray(loss, dtype=logits.dtype), (logits,), grad_fn, "cross_entropy")


# --- Reverse-mode driver ---

class ComputationTape:
    """
    The recorded operations reachable from a root, ordered parents-before-children.

    Replaying the tape in reverse visits every recorded operation exactly once.
    """

    def __init__(self, root: Tensor):
        self.root = root
        self.nodes = self._topological_order(root)

    @staticmethod
    def _topological_order(root: Tensor) -> list:
        order, visited = [], set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def __len__(self) -> int:
        return len(self.nodes)

    def replay(self, seed_grad: np.ndarray) -> None:
        grads = {id(self.root): seed_grad}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._grad_fn is None:
                node.grad = g.astype(node.dtype, copy=True) if node.grad is None else node.grad + g
                continue
            for parent, parent_grad in zip(node._parents, node._grad_fn(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad


def backward(loss: Tensor, inputs: Optional[Iterable[Tensor]] = None) -> None:
    """
    Populates `grad` on every trainable leaf that `loss` depends on.

    Leaves listed in `inputs` that the loss does not depend on receive a zero
    gradient. Calling backward again without `zero_grad` accumulates.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {loss.shape}")
    if loss.requires_grad:
        ComputationTape(loss).replay(np.ones_like(loss.data))
    for leaf in inputs or ():
        if leaf.requires_grad and leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.data)
