# tests/model/test_embedder.py
import math

import numpy as np
import pytest

from src.core import tensor as T
from src.exceptions import ShapeError
from src.model.embedder import (EmbeddingVector, cosine_similarity, cosine_similarity_matrix, embed_texts, encode,
                                mean_pool, mean_pool_tensor, pooling_mask)


def test_mean_pool_examples():
    hidden = np.array([[1.0, 2.0], [3.0, 4.0], [9.0, 9.0]])
    np.testing.assert_array_equal(mean_pool(hidden, [0, 1, 0]).values, [3.0, 4.0])
    np.testing.assert_array_equal(mean_pool(hidden, [1, 1, 0]).values, [2.0, 3.0])
    with pytest.raises(ShapeError, match="all-masked"):
        mean_pool(hidden, [0, 0, 0])


def test_mean_pool_tensor_ignores_masked_rows():
    hidden = T.Tensor(np.arange(12, dtype=float).reshape(2, 3, 2))
    pooled = mean_pool_tensor(hidden, np.array([[1, 1, 0], [1, 0, 0]])).numpy()
    np.testing.assert_allclose(pooled, [[1.0, 2.0], [6.0, 7.0]])
    with pytest.raises(ShapeError, match="row 1"):
        mean_pool_tensor(hidden, np.array([[1, 0, 0], [0, 0, 0]]))


def test_pooling_mask_can_drop_specials():
    mask = pooling_mask(np.array([[1, 1, 1, 0]]), np.array([[-1, 0, -1, -1]]), include_special=False)
    assert mask.tolist() == [[False, True, False, False]]


def test_cosine_examples():
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert cosine_similarity([1.0, 0.0], [1.0, 1.0]) == pytest.approx(math.sqrt(2) / 2, abs=1e-5)
    assert cosine_similarity(EmbeddingVector(np.array([2.0, 2.0])), [1.0, 1.0]) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="zero vector"):
        cosine_similarity([0.0, 0.0], [1.0, 0.0])


def test_cosine_matrix_agrees_with_pairwise(float64):
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(3, 5)), rng.normal(size=(4, 5))
    matrix = cosine_similarity_matrix(T.Tensor(a), T.Tensor(b)).numpy()
    for i in range(3):
        for j in range(4):
            assert matrix[i, j] == pytest.approx(cosine_similarity(a[i], b[j]), abs=1e-12)


def test_encode_preserves_order_and_ids(tiny_model, toy_vocab):
    texts = ["the cat sat", "the cat sat", "a dog", "running on the mat"]
    vectors = encode(tiny_model, texts, toy_vocab, max_len=16, ids=["a", "b", "c", "d"], batch_size=2, n_jobs=1)
    assert [v.source_id for v in vectors] == ["a", "b", "c", "d"]
    np.testing.assert_allclose(vectors[0].values, vectors[1].values, rtol=1e-12)
    again = encode(tiny_model, texts, toy_vocab, max_len=16, batch_size=2, n_jobs=1)
    assert all(np.array_equal(v.values, w.values) for v, w in zip(vectors, again))
    single = encode(tiny_model, ["a dog"], toy_vocab, max_len=16, n_jobs=1)[0]
    np.testing.assert_allclose(vectors[2].values, single.values, rtol=1e-12)


def test_threaded_encoding_matches_sequential(tiny_model, toy_vocab):
    texts = [f"the {w} sat on the mat" for w in ("cat", "dog", "a", "b", "mat", "cat", "dog")]
    sequential = encode(tiny_model, texts, toy_vocab, 16, batch_size=2, n_jobs=1)
    threaded = encode(tiny_model, texts, toy_vocab, 16, batch_size=2, n_jobs=3)
    for s, t in zip(sequential, threaded):
        np.testing.assert_allclose(s.values, t.values, rtol=1e-12)
    assert T.is_grad_enabled()


def test_encode_rejects_foreign_vocabulary(tiny_model, synthetic_vocab):
    with pytest.raises(ShapeError, match="vocabulary"):
        encode(tiny_model, ["the"], synthetic_vocab, 16)


def test_embed_texts_is_differentiable(tiny_model, toy_vocab):
    pooled = embed_texts(tiny_model, ["the cat", "a dog sat"], toy_vocab, 16)
    assert pooled.shape == (2, 8)
    weights = T.Tensor(np.random.default_rng(0).normal(size=(2, 8)))
    T.backward((pooled * weights).sum(), inputs=tiny_model.parameters())
    assert np.any(tiny_model["embeddings.word_embeddings"].grad != 0)
