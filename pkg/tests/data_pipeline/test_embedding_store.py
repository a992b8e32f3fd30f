# tests/data_pipeline/test_embedding_store.py
import numpy as np
import pytest

from src.data_pipeline.embedding_store import (load_embeddings, load_embeddings_jsonl, save_embeddings,
                                               save_embeddings_jsonl)
from src.exceptions import DataError, NumericError, ShapeError
from src.model.embedder import EmbeddingVector


@pytest.fixture
def vectors():
    rng = np.random.default_rng(0)
    return [EmbeddingVector(rng.normal(size=4).astype(np.float32), f"doc-{i}") for i in range(5)]


def test_binary_file_preserves_order_and_values(vectors, tmp_path):
    path = str(tmp_path / "emb.jev")
    save_embeddings(vectors, path)
    loaded = load_embeddings(path)
    assert [v.source_id for v in loaded] == [v.source_id for v in vectors]
    for original, restored in zip(vectors, loaded):
        np.testing.assert_array_equal(original.values, restored.values)


def test_binary_header_layout(vectors, tmp_path):
    path = tmp_path / "emb.jev"
    save_embeddings(vectors, str(path))
    payload = path.read_bytes()
    assert payload[:4] == b"JEV2"
    assert int.from_bytes(payload[8:16], "little") == 5
    assert int.from_bytes(payload[16:20], "little") == 4


def test_bad_magic_and_truncation_are_data_errors(vectors, tmp_path):
    path = tmp_path / "emb.jev"
    save_embeddings(vectors, str(path))
    payload = path.read_bytes()
    path.write_bytes(b"XXXX" + payload[4:])
    with pytest.raises(DataError, match="bad magic"):
        load_embeddings(str(path))
    path.write_bytes(payload[:-3])
    with pytest.raises(DataError, match="truncated"):
        load_embeddings(str(path))


def test_jsonl_file_preserves_order(vectors, tmp_path):
    path = str(tmp_path / "emb.jsonl")
    save_embeddings_jsonl(vectors, path)
    loaded = load_embeddings_jsonl(path)
    assert [v.source_id for v in loaded] == [v.source_id for v in vectors]
    np.testing.assert_allclose(np.stack([v.values for v in loaded]), np.stack([v.values for v in vectors]), rtol=1e-6)


def test_embedding_vector_validation():
    with pytest.raises(ShapeError):
        EmbeddingVector(np.ones((2, 2)))
    with pytest.raises(NumericError):
        EmbeddingVector(np.array([1.0, np.inf]), "bad")
