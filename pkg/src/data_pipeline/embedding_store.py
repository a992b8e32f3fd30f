# src/data_pipeline/embedding_store.py
"""
Embedding output files.

Binary layout (little-endian): magic b"JEV2", u32 version, u64 count, u32 dim,
then per record a u16 id length, the UTF-8 id, and dim float32 values.
The JSON-lines alternative writes one {"id": ..., "vector": [...]} object per line.
"""
import struct
from typing import Sequence

import numpy as np
import pandas as pd

from src import config
from src.exceptions import DataError
from src.logger import logger
from src.model.embedder import EmbeddingVector
from .io_utils import atomic_write

_HEADER = struct.Struct("<4sIQI")
_ID_LENGTH = struct.Struct("<H")


def save_embeddings(vectors: Sequence, path: str) -> None:
    """Writes EmbeddingVectors in the binary format; records without an id get their index."""
    dim = len(vectors[0]) if vectors else 0
    with atomic_write(path, "wb") as f:
        f.write(_HEADER.pack(config.EMBEDDING_MAGIC, config.EMBEDDING_VERSION, len(vectors), dim))
        for index, vector in enumerate(vectors):
            if len(vector) != dim:
                raise DataError(f"embedding {index} has dimension {len(vector)}, expected {dim}")
            key = (vector.source_id if vector.source_id is not None else str(index)).encode("utf-8")
            if len(key) > 0xFFFF:
                raise DataError(f"embedding id of {len(key)} bytes does not fit the format")
            f.write(_ID_LENGTH.pack(len(key)))
            f.write(key)
            f.write(np.asarray(vector.values, dtype="<f4").tobytes())
    logger.info(f"Saved {len(vectors)} embeddings (dim={dim}) to {path}")


def load_embeddings(path: str) -> list:
    try:
        with open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        raise DataError(f"Cannot read embedding file {path}: {e}") from e
    if len(payload) < _HEADER.size:
        raise DataError(f"{path}: truncated embedding header")
    magic, version, count, dim = _HEADER.unpack_from(payload, 0)
    if magic != config.EMBEDDING_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {config.EMBEDDING_MAGIC!r}")
    if version != config.EMBEDDING_VERSION:
        raise DataError(f"{path}: unsupported embedding file version {version}")

    offset = _HEADER.size
    vectors = []
    for index in range(count):
        if offset + _ID_LENGTH.size > len(payload):
            raise DataError(f"{path}: truncated at record {index}")
        (id_length,) = _ID_LENGTH.unpack_from(payload, offset)
        offset += _ID_LENGTH.size
        end = offset + id_length + 4 * dim
        if end > len(payload):
            raise DataError(f"{path}: truncated at record {index}")
        key = payload[offset:offset + id_length].decode("utf-8")
        values = np.frombuffer(payload, dtype="<f4", count=dim, offset=offset + id_length).copy()
        vectors.append(EmbeddingVector(values, key))
        offset = end
    return vectors


def save_embeddings_jsonl(vectors: Sequence, path: str) -> None:
    frame = pd.DataFrame({
        "id": [v.source_id if v.source_id is not None else str(i) for i, v in enumerate(vectors)],
        "vector": [np.asarray(v.values, dtype=np.float64).tolist() for v in vectors],
    })
    with atomic_write(path, "w", encoding="utf-8") as f:
        frame.to_json(f, orient="records", lines=True, force_ascii=False)
    logger.info(f"Saved {len(vectors)} embeddings to {path}")


def load_embeddings_jsonl(path: str) -> list:
    try:
        frame = pd.read_json(path, lines=True, dtype={"id": str})
    except ValueError as e:
        raise DataError(f"Error parsing embedding file {path}: {e}") from e
    return [EmbeddingVector(np.asarray(row.vector, dtype=np.float64), str(row.id)) for row in frame.itertuples()]
