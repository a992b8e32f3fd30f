# tests/core/test_tensor.py
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.core import tensor as T
from src.core.gradcheck import max_relative_error
from src.exceptions import NumericError, ShapeError


def test_matmul_examples():
    eye = T.Tensor(np.eye(2))
    np.testing.assert_array_equal((eye @ eye).numpy(), np.eye(2))
    out = T.Tensor([[1.0, 2.0], [3.0, 4.0]]) @ T.Tensor([[1.0], [1.0]])
    np.testing.assert_array_equal(out.numpy(), [[3.0], [7.0]])


def test_matmul_shape_mismatch_names_extents():
    with pytest.raises(ShapeError, match="inner extents"):
        T.Tensor(np.ones((2, 3))) @ T.Tensor(np.ones((2, 3)))


def test_softmax_examples():
    np.testing.assert_allclose(T.softmax(T.Tensor([0.0, 0.0, 0.0])).numpy(), [1 / 3] * 3, rtol=1e-6)
    np.testing.assert_allclose(T.softmax(T.Tensor([0.0, math.log(3.0)])).numpy(), [0.25, 0.75], rtol=1e-6)


def test_softmax_rejects_non_finite_and_names_index():
    with pytest.raises(NumericError, match=r"\(1,\)"):
        T.softmax(T.Tensor([0.0, np.nan, 1.0]))


def test_layer_norm_examples():
    gain, bias = T.Tensor(np.ones(2)), T.Tensor(np.zeros(2))
    np.testing.assert_allclose(T.layer_norm(T.Tensor([1.0, 3.0]), gain, bias).numpy(), [-1.0, 1.0], atol=1e-5)
    flat = T.layer_norm(T.Tensor(np.full(4, 7.0)), T.Tensor(np.ones(4)), T.Tensor(np.zeros(4)))
    np.testing.assert_array_equal(flat.numpy(), np.zeros(4))


def test_cross_entropy_examples():
    uniform = T.cross_entropy(T.Tensor(np.zeros((1, 4))), [2])
    assert uniform.item() == pytest.approx(math.log(4), abs=1e-6)
    certain = T.cross_entropy(T.Tensor([[0.0, 100.0, 0.0]]), [1])
    assert certain.item() == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(ValueError, match="outside"):
        T.cross_entropy(T.Tensor(np.zeros((1, 4))), [4])


def test_product_rule():
    x, y = T.parameter(2.0), T.parameter(3.0)
    T.backward(x * y)
    assert float(x.grad) == 3.0
    assert float(y.grad) == 2.0


def test_shared_subexpression_accumulates(float64):
    x = T.parameter(np.array([1.5, -2.0]))
    T.backward((x * x + x).sum())
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_repeated_backward_accumulates_until_zero_grad():
    x = T.parameter(np.array([1.0, 2.0]))
    T.backward((x * 3.0).sum())
    T.backward((x * 3.0).sum())
    np.testing.assert_allclose(x.grad, [6.0, 6.0])
    x.zero_grad()
    assert x.grad is None


def test_backward_rejects_non_scalar_root():
    x = T.parameter(np.ones(3))
    with pytest.raises(ShapeError, match="scalar"):
        T.backward(x * 2.0)


def test_backward_gives_zero_grad_to_unused_inputs():
    x, unused = T.parameter(np.ones(2)), T.parameter(np.ones(3))
    T.backward(x.sum(), inputs=[x, unused])
    np.testing.assert_array_equal(unused.grad, np.zeros(3))


def test_no_grad_records_nothing():
    x = T.parameter(np.ones(2))
    with T.no_grad():
        y = (x * 2.0).sum()
    assert not y.requires_grad
    assert T.is_grad_enabled()


def test_default_dtype_context_restores():
    before = T.get_default_dtype()
    with T.default_dtype(np.float64):
        assert T.Tensor([1.0]).dtype == np.float64
    assert T.get_default_dtype() is before
    with pytest.raises(ValueError):
        T.set_default_dtype(np.int32)


def test_dropout_is_identity_in_eval_and_inverted_in_training():
    x = T.Tensor(np.ones((200, 50)))
    assert T.dropout(x, 0.5, None, training=False) is x
    kept = T.dropout(x, 0.5, np.random.default_rng(0), training=True).numpy()
    assert set(np.unique(kept)) <= {0.0, 2.0}
    assert kept.mean() == pytest.approx(1.0, abs=0.05)


def _random(rng, *shape, positive=False):
    values = rng.normal(size=shape)
    return T.parameter(np.abs(values) + 0.5 if positive else values)


@pytest.mark.parametrize("name", [
    "add", "sub", "mul", "div", "pow", "exp", "log", "sqrt", "matmul", "batched_matmul", "sum_axis",
    "mean", "transpose", "reshape", "concat", "gather_rows", "relu", "gelu", "softmax", "log_softmax",
    "layer_norm", "cross_entropy",
])
def test_operation_gradients_match_finite_differences(name, float64):
    rng = np.random.default_rng(7)
    a, b = _random(rng, 3, 4), _random(rng, 3, 4)
    pos = _random(rng, 3, 4, positive=True)
    w = _random(rng, 4, 5)
    weights = T.Tensor(rng.normal(size=(3, 4)))
    row = T.Tensor(rng.normal(size=4))
    gain, shift = _random(rng, 4), _random(rng, 4)
    cases = {
        "add": ([a, b], lambda: (a + b) * weights),
        "sub": ([a, b], lambda: (a - b) * weights),
        "mul": ([a, b], lambda: a * b),
        "div": ([a, pos], lambda: a / pos),
        "pow": ([pos], lambda: pos ** 1.5),
        "exp": ([a], lambda: T.exp(a) * weights),
        "log": ([pos], lambda: T.log(pos) * weights),
        "sqrt": ([pos], lambda: T.sqrt(pos) * weights),
        "matmul": ([a, w], lambda: a @ w),
        "batched_matmul": ([a, b], lambda: a.reshape(3, 1, 4) @ b.reshape(3, 4, 1)),
        "sum_axis": ([a], lambda: a.sum(axis=0) * row),
        "mean": ([a], lambda: a.mean(axis=1, keepdims=True) * weights),
        "transpose": ([a], lambda: a.transpose(1, 0) @ weights),
        "reshape": ([a], lambda: a.reshape(2, 6) * weights.reshape(2, 6)),
        "concat": ([a, b], lambda: T.concat([a, b], axis=1) * T.concat([weights, weights], axis=1)),
        "gather_rows": ([w], lambda: T.gather_rows(w, [[0, 2], [2, 3]]) * 1.7),
        "relu": ([a], lambda: T.relu(a) * weights),
        "gelu": ([a], lambda: T.gelu(a) * weights),
        "softmax": ([a], lambda: T.softmax(a, axis=-1) * weights),
        "log_softmax": ([a], lambda: T.log_softmax(a) * weights),
        "layer_norm": ([a, gain, shift], lambda: T.layer_norm(a, gain, shift) * weights),
        "cross_entropy": ([a], lambda: T.cross_entropy(a, [0, 3, 1])),
    }
    tensors, fn = cases[name]

    def scalar():
        out = fn()
        return out.sum() if out.size > 1 else out

    assert max_relative_error(scalar, tensors) < 1e-4


def test_operations_match_torch(float64):
    torch = pytest.importorskip("torch")
    rng = np.random.default_rng(3)
    x_np = rng.normal(size=(4, 6))
    targets = np.array([0, 5, 2, 1])

    x = T.parameter(x_np)
    gain, bias = T.parameter(rng.normal(size=6)), T.parameter(rng.normal(size=6))
    ours = T.cross_entropy(T.gelu(T.layer_norm(x, gain, bias)), targets)
    T.backward(ours)

    xt = torch.tensor(x_np, requires_grad=True)
    gt = torch.tensor(gain.data, requires_grad=True)
    bt = torch.tensor(bias.data, requires_grad=True)
    normed = torch.nn.functional.layer_norm(xt, (6,), gt, bt, eps=1e-12)
    theirs = torch.nn.functional.cross_entropy(torch.nn.functional.gelu(normed), torch.tensor(targets))
    theirs.backward()

    assert ours.item() == pytest.approx(theirs.item(), rel=1e-9)
    np.testing.assert_allclose(x.grad, xt.grad.numpy(), rtol=1e-7, atol=1e-10)
    np.testing.assert_allclose(gain.grad, gt.grad.numpy(), rtol=1e-7, atol=1e-10)
    np.testing.assert_allclose(bias.grad, bt.grad.numpy(), rtol=1e-7, atol=1e-10)

    probs = T.softmax(T.Tensor(x_np), axis=0).numpy()
    np.testing.assert_allclose(probs, torch.softmax(torch.tensor(x_np), dim=0).numpy(), rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 5), elements=st.floats(-50, 50)))
def test_softmax_rows_are_distributions(values):
    probs = T.softmax(T.Tensor(values)).numpy()
    assert np.all(probs >= 0)
    np.testing.assert_allclose(probs.sum(axis=-1), np.ones(3), rtol=1e-5)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 6), elements=st.floats(-100, 100)), st.floats(-5, 5))
def test_softmax_is_shift_invariant(values, shift):
    np.testing.assert_allclose(T.softmax(T.Tensor(values)).numpy(), T.softmax(T.Tensor(values + shift)).numpy(),
                               atol=1e-4)
