# tests/model/test_contrastive.py
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core import tensor as T
from src.core.gradcheck import max_relative_error
from src.exceptions import ShapeError
from src.model.contrastive import (PairBatch, TripletBatch, hard_negative_from_scores, hard_negative_loss,
                                   info_nce_from_scores, pair_info_nce)
from src.model.embedder import embed_texts


@pytest.mark.parametrize("k", [2, 4, 8])
def test_tied_scores_give_twice_log_k(k, float64):
    loss = info_nce_from_scores(np.full((k, k), 0.3))
    assert loss.item() == pytest.approx(2 * math.log(k), rel=1e-12)


def test_separable_pairs_have_near_zero_loss(float64):
    loss = info_nce_from_scores(np.eye(4), tau=0.05).item()
    assert loss == pytest.approx(2 * math.log1p(3 * math.exp(-20)), rel=1e-5)
    assert loss == pytest.approx(1.24e-8, rel=0.01)


def test_single_triplet_hard_negative_values(float64):
    tied = hard_negative_from_scores(np.zeros((1, 1)), np.zeros((1, 15)))
    assert tied.item() == pytest.approx(math.log(16), rel=1e-12)
    separable = hard_negative_from_scores(np.ones((1, 1)), np.zeros((1, 15)), tau=0.05).item()
    assert separable == pytest.approx(math.log1p(15 * math.exp(-20)), rel=1e-5)
    assert separable == pytest.approx(3.09e-8, rel=0.01)


def test_hard_negatives_raise_the_loss(float64):
    pairs = np.eye(3) * 0.9
    easy = hard_negative_from_scores(pairs, np.full((3, 6), -0.5), tau=0.1).item()
    hard = hard_negative_from_scores(pairs, np.full((3, 6), 0.8), tau=0.1).item()
    assert hard > easy > info_nce_from_scores(pairs, tau=0.1).item() / 2


def test_shape_errors():
    with pytest.raises(ShapeError, match="at least 2"):
        info_nce_from_scores(np.ones((1, 1)))
    with pytest.raises(ShapeError, match="square"):
        info_nce_from_scores(np.ones((2, 3)))
    with pytest.raises(ShapeError, match="at least 2"):
        PairBatch(["q"], ["t"])
    with pytest.raises(ShapeError, match="14 negatives"):
        TripletBatch(["q"], ["p"], [["n"] * 14])
    rng = np.random.default_rng(0)
    with pytest.raises(ShapeError, match="15 negatives per record"):
        hard_negative_loss(rng.normal(size=(2, 4)), rng.normal(size=(2, 4)), rng.normal(size=(28, 4)))
    with pytest.raises(ValueError, match="temperature"):
        info_nce_from_scores(np.eye(2), tau=0.0)


def test_flat_negatives_are_record_major():
    batch = TripletBatch(["q0", "q1"], ["p0", "p1"], [[f"a{i}" for i in range(15)], [f"b{i}" for i in range(15)]])
    flat = batch.flat_negatives()
    assert flat[:15] == batch.negatives[0] and flat[15:] == batch.negatives[1]


def test_pair_info_nce_gradients(float64):
    rng = np.random.default_rng(1)
    queries, targets = T.Tensor(rng.normal(size=(4, 6))), T.Tensor(rng.normal(size=(4, 6)))
    error = max_relative_error(lambda: pair_info_nce(queries, targets, tau=0.5), [queries, targets])
    assert error < 1e-5


def test_hard_negative_gradients_with_either_layout(float64):
    rng = np.random.default_rng(2)
    queries, positives = T.Tensor(rng.normal(size=(2, 5))), T.Tensor(rng.normal(size=(2, 5)))
    negatives = T.Tensor(rng.normal(size=(2, 3, 5)))
    stacked = hard_negative_loss(queries, positives, negatives, tau=0.5, num_negatives=3).item()
    flat = hard_negative_loss(queries, positives, negatives.reshape(6, 5), tau=0.5, num_negatives=3).item()
    assert stacked == pytest.approx(flat, rel=1e-12)
    error = max_relative_error(lambda: hard_negative_loss(queries, positives, negatives, tau=0.5, num_negatives=3),
                               [queries, positives, negatives])
    assert error < 1e-5


def test_encoder_and_pair_loss_gradients(tiny_model, toy_vocab):
    tiny_model["embeddings.word_embeddings"].data *= 50.0
    queries, targets = ["the cat sat", "a dog", "running on"], ["the mat", "a b", "the dog sat on the mat"]

    def loss():
        return pair_info_nce(embed_texts(tiny_model, queries, toy_vocab, 16),
                             embed_texts(tiny_model, targets, toy_vocab, 16), tau=0.5)

    assert max_relative_error(loss, tiny_model.parameters(), samples_per_tensor=3) < 1e-4


def test_encoder_and_hard_negative_loss_gradients(tiny_model, toy_vocab):
    tiny_model["embeddings.word_embeddings"].data *= 50.0
    queries, positives = ["the cat sat", "a dog running"], ["the mat", "the dog sat on the mat"]
    negatives = ["a b", "un", "cat cat", "on the", ".", "b , a", "running", "the sat dog"]

    def loss():
        return hard_negative_loss(embed_texts(tiny_model, queries, toy_vocab, 16),
                                  embed_texts(tiny_model, positives, toy_vocab, 16),
                                  embed_texts(tiny_model, negatives, toy_vocab, 16), tau=0.5, num_negatives=4)

    assert max_relative_error(loss, tiny_model.parameters(), samples_per_tensor=3) < 1e-4


def test_info_nce_matches_torch(float64):
    torch = pytest.importorskip("torch")
    rng = np.random.default_rng(3)
    q, t = rng.normal(size=(5, 7)), rng.normal(size=(5, 7))
    ours = pair_info_nce(q, t, tau=0.05).item()

    f = torch.nn.functional
    logits = f.normalize(torch.tensor(q), dim=1) @ f.normalize(torch.tensor(t), dim=1).T / 0.05
    labels = torch.arange(5)
    theirs = (f.cross_entropy(logits, labels) + f.cross_entropy(logits.T, labels)).item()
    assert ours == pytest.approx(theirs, rel=1e-10)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_losses_ignore_batch_order_and_embedding_scale(seed, float64):
    rng = np.random.default_rng(seed)
    q, t, negs = rng.normal(size=(5, 6)), rng.normal(size=(5, 6)), rng.normal(size=(5, 3, 6))
    order = rng.permutation(5)
    scale = rng.uniform(0.01, 100.0)

    pair = pair_info_nce(q, t, tau=0.1).item()
    assert pair_info_nce(q[order], t[order], tau=0.1).item() == pytest.approx(pair, rel=1e-10)
    assert pair_info_nce(q * scale, t, tau=0.1).item() == pytest.approx(pair, rel=1e-10)
    assert pair_info_nce(q, t * scale, tau=0.1).item() == pytest.approx(pair, rel=1e-10)

    hard = hard_negative_loss(q, t, negs, tau=0.1, num_negatives=3).item()
    permuted = hard_negative_loss(q[order], t[order], negs[order], tau=0.1, num_negatives=3).item()
    assert permuted == pytest.approx(hard, rel=1e-10)
    rescaled = hard_negative_loss(q * scale, t * scale, negs * scale, tau=0.1, num_negatives=3).item()
    assert rescaled == pytest.approx(hard, rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.integers(1, 4), st.floats(0.05, 1.0), st.floats(0.02, 1.0), st.integers(0, 10_000))
def test_a_margin_bounds_the_loss(k, m, gap, tau, seed):
    """Positives ahead of every other candidate by `gap` keep each direction below log1p(n exp(-gap / tau))."""
    rng = np.random.default_rng(seed)
    with T.default_dtype(np.float64):
        scores = rng.uniform(-1.0, 0.0, size=(k, k))
        np.fill_diagonal(scores, gap)
        bound = 2 * math.log1p((k - 1) * math.exp(-gap / tau))
        loss = info_nce_from_scores(scores, tau=tau).item()
        assert loss <= bound * (1 + 1e-9)
        assert info_nce_from_scores(scores, tau=tau / 2).item() <= loss * (1 + 1e-9)

        negatives = rng.uniform(-1.0, 0.0, size=(k, k * m))
        forward_bound = math.log1p((k - 1 + k * m) * math.exp(-gap / tau))
        reversed_bound = math.log1p((k - 1) * math.exp(-gap / tau))
        hard = hard_negative_from_scores(scores, negatives, tau=tau).item()
        assert hard <= (forward_bound + reversed_bound) * (1 + 1e-9)
