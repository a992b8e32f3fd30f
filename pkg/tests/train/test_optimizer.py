# tests/train/test_optimizer.py
import numpy as np
import pytest

from src.core import tensor as T
from src.exceptions import NumericError
from train.config import OptimizerConfig
from train.optimizer import AdamWState, adamw_step, clip_grad_norm, lr_at


def _param(values, grad):
    p = T.parameter(np.array(values, dtype=float))
    p.grad = np.array(grad, dtype=float)
    return p


def test_schedule_examples():
    cfg = OptimizerConfig(peak_lr=1e-3, warmup_steps=10, total_steps=110)
    assert lr_at(0, cfg) == 0.0
    assert lr_at(5, cfg) == pytest.approx(5e-4)
    assert lr_at(10, cfg) == pytest.approx(1e-3)
    assert lr_at(60, cfg) == pytest.approx(5e-4)
    assert lr_at(110, cfg) == 0.0
    assert lr_at(500, cfg) == 0.0
    with pytest.raises(ValueError):
        lr_at(-1, cfg)


def test_warmup_longer_than_training_rejected():
    with pytest.raises(ValueError, match="exceeds total_steps"):
        OptimizerConfig(warmup_steps=20, total_steps=10)


def test_zero_gradient_only_decays(float64):
    cfg = OptimizerConfig(peak_lr=0.1, warmup_steps=0, total_steps=10, weight_decay=0.5)
    params = {"w": _param([2.0, -4.0], [0.0, 0.0])}
    adamw_step(params, AdamWState.zeros_like(params), cfg)
    lr = lr_at(1, cfg)
    np.testing.assert_allclose(params["w"].data, np.array([2.0, -4.0]) * (1 - lr * 0.5), rtol=1e-12)


def test_first_step_moves_by_the_learning_rate(float64):
    cfg = OptimizerConfig(peak_lr=0.01, warmup_steps=1, total_steps=100, weight_decay=0.0)
    params = {"w": _param([1.0], [0.5])}
    state = AdamWState.zeros_like(params)
    adamw_step(params, state, cfg)
    assert state.step == 1
    assert params["w"].data[0] == pytest.approx(1.0 - 0.01, abs=1e-7)


def test_non_finite_gradient_names_the_tensor():
    params = {"layers.0.mlp.gate.weight": _param([1.0, 2.0], [np.nan, 0.0])}
    with pytest.raises(NumericError, match="layers.0.mlp.gate.weight"):
        adamw_step(params, AdamWState.zeros_like(params), OptimizerConfig())


def test_missing_gradient_rejected():
    p = T.parameter(np.ones(2))
    with pytest.raises(ValueError, match="no gradient"):
        adamw_step({"w": p}, AdamWState.zeros_like({"w": p}), OptimizerConfig())


def test_global_norm_clipping(float64):
    params = {"a": _param([0.0], [3.0]), "b": _param([0.0], [4.0])}
    assert clip_grad_norm(params, 1.0) == pytest.approx(5.0)
    np.testing.assert_allclose(params["a"].grad, [0.6], rtol=1e-9)
    np.testing.assert_allclose(params["b"].grad, [0.8], rtol=1e-9)
    assert clip_grad_norm(params, 10.0) == pytest.approx(1.0, rel=1e-9)
    np.testing.assert_allclose(params["a"].grad, [0.6], rtol=1e-9)


CURVATURE = np.array([1.0, 10.0, 0.1])
CENTER = np.array([1.0, -2.0, 0.5])


def _bowl_gradient(w):
    return CURVATURE * (w - CENTER)


def _reference_adam(cfg, steps):
    """Textbook bias-corrected Adam with the same learning-rate schedule."""
    w, m, v = np.zeros(3), np.zeros(3), np.zeros(3)
    for t in range(1, steps + 1):
        g = _bowl_gradient(w)
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g ** 2
        m_hat, v_hat = m / (1 - cfg.beta1 ** t), v / (1 - cfg.beta2 ** t)
        w = w - lr_at(t, cfg) * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return w


def _adamw_on_bowl(cfg, steps):
    params = {"w": T.parameter(np.zeros(3))}
    state = AdamWState.zeros_like(params)
    for _ in range(steps):
        params["w"].grad = _bowl_gradient(params["w"].data)
        adamw_step(params, state, cfg)
    return params["w"].data


BOWL = OptimizerConfig(peak_lr=0.05, warmup_steps=10, total_steps=400, weight_decay=0.0, clip_norm=None)


def test_without_weight_decay_matches_adam_on_a_quadratic_bowl(float64):
    np.testing.assert_allclose(_adamw_on_bowl(BOWL, 400), _reference_adam(BOWL, 400), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(_adamw_on_bowl(BOWL, 400), CENTER, atol=5e-2)


def test_without_weight_decay_matches_torch_adam(float64):
    torch = pytest.importorskip("torch")
    w = torch.zeros(3, dtype=torch.float64, requires_grad=True)
    adam = torch.optim.Adam([w], lr=0.0, betas=(BOWL.beta1, BOWL.beta2), eps=BOWL.eps)
    curvature, center = torch.tensor(CURVATURE), torch.tensor(CENTER)
    for t in range(1, 101):
        adam.zero_grad()
        (0.5 * (curvature * (w - center) ** 2).sum()).backward()
        adam.param_groups[0]["lr"] = lr_at(t, BOWL)
        adam.step()
    np.testing.assert_allclose(_adamw_on_bowl(BOWL, 100), w.detach().numpy(), rtol=1e-9, atol=1e-12)
