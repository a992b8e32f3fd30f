# train/checkpoint.py
"""
Checkpoint files.

Layout (little-endian): magic b"JBRT", u32 version, u32 header length, UTF-8 JSON
header, u32 tensor count, then per tensor: u16 name length, UTF-8 name, u8 dtype
code, u8 rank, u64 extents, raw data. Tensor names are prefixed "param/",
"adam_m/" or "adam_v/".
"""
import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src import config as main_config
from src.data_pipeline.io_utils import atomic_write
from src.exceptions import CheckpointError, VocabularyError
from src.logger import logger
from src.model.config import ModelConfig
from src.model.encoder import EncoderState
from .optimizer import AdamWState

_PREAMBLE = struct.Struct("<4sII")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")
_U8 = struct.Struct("<B")
_U64 = struct.Struct("<Q")

DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1, np.dtype("int64"): 2}
CODE_DTYPES = {code: dtype for dtype, code in DTYPE_CODES.items()}

PARAM_PREFIX = "param/"
MOMENT1_PREFIX = "adam_m/"
MOMENT2_PREFIX = "adam_v/"


@dataclass
class Checkpoint:
    model_config: ModelConfig
    weights: "OrderedDict[str, np.ndarray]"
    step: int = 0
    seed: int = 0
    stage: str = "pretrain"
    optimizer: Optional[AdamWState] = None
    vocab_fingerprint: Optional[str] = None
    sampler_state: Optional[dict] = None
    train_config: Optional[dict] = None
    version: int = main_config.CHECKPOINT_VERSION
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_state(cls, state: EncoderState, **kwargs) -> "Checkpoint":
        weights = OrderedDict((name, p.data.copy()) for name, p in state.params.items())
        return cls(model_config=state.config, weights=weights, **kwargs)

    def to_state(self) -> EncoderState:
        return EncoderState.from_arrays(self.model_config, self.weights)

    def header(self) -> dict:
        return {
            "model_config": self.model_config.model_dump(),
            "step": self.step,
            "seed": self.seed,
            "stage": self.stage,
            "optimizer_step": self.optimizer.step if self.optimizer is not None else None,
            "vocab_fingerprint": self.vocab_fingerprint,
            "sampler_state": self.sampler_state,
            "train_config": self.train_config,
            "extra": self.extra,
        }

    def tensors(self) -> "OrderedDict[str, np.ndarray]":
        table = OrderedDict((PARAM_PREFIX + name, array) for name, array in self.weights.items())
        if self.optimizer is not None:
            table.update((MOMENT1_PREFIX + name, array) for name, array in self.optimizer.m.items())
            table.update((MOMENT2_PREFIX + name, array) for name, array in self.optimizer.v.items())
        return table


def _encode_tensor(name: str, array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.dtype not in DTYPE_CODES:
        raise CheckpointError(f"tensor '{name}' has unsupported dtype {array.dtype}")
    key = name.encode("utf-8")
    parts = [_U16.pack(len(key)), key, _U8.pack(DTYPE_CODES[array.dtype]), _U8.pack(array.ndim)]
    parts += [_U64.pack(extent) for extent in array.shape]
    parts.append(np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<")).tobytes())
    return b"".join(parts)


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    """Writes atomically; the same checkpoint always produces the same bytes."""
    header = json.dumps(ckpt.header(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    tensors = ckpt.tensors()
    with atomic_write(path, "wb") as f:
        f.write(_PREAMBLE.pack(main_config.CHECKPOINT_MAGIC, ckpt.version, len(header)))
        f.write(header)
        f.write(_U32.pack(len(tensors)))
        for name, array in tensors.items():
            f.write(_encode_tensor(name, array))
    logger.info(f"✅ Checkpoint (step {ckpt.step}, {len(tensors)} tensors) saved to {path}")


class _Reader:
    def __init__(self, payload: bytes, path: str):
        self.payload = payload
        self.path = path
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.payload):
            raise CheckpointError(f"{self.path}: truncated while reading {what}")
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: struct.Struct, what: str):
        return fmt.unpack(self.take(fmt.size, what))


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        logger.error(f"Failed to read checkpoint {path}: {e}")
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e

    reader = _Reader(payload, path)
    magic, version, header_length = reader.unpack(_PREAMBLE, "preamble")
    if magic != main_config.CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {main_config.CHECKPOINT_MAGIC!r}")
    if version != main_config.CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(reader.take(header_length, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from e

    (count,) = reader.unpack(_U32, "tensor count")
    tensors = OrderedDict()
    for index in range(count):
        (name_length,) = reader.unpack(_U16, f"tensor {index}")
        name = reader.take(name_length, f"tensor {index} name").decode("utf-8")
        (code,) = reader.unpack(_U8, name)
        (rank,) = reader.unpack(_U8, name)
        if code not in CODE_DTYPES:
            raise CheckpointError(f"{path}: tensor '{name}' has unknown dtype code {code}")
        shape = tuple(reader.unpack(_U64, name)[0] for _ in range(rank))
        dtype = CODE_DTYPES[code].newbyteorder("<")
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        array = np.frombuffer(reader.take(size, name), dtype=dtype).reshape(shape)
        tensors[name] = array.astype(CODE_DTYPES[code], copy=True)
    if reader.offset != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - reader.offset} trailing bytes after the tensor table")

    weights, m, v = OrderedDict(), OrderedDict(), OrderedDict()
    for name, array in tensors.items():
        for prefix, target in ((PARAM_PREFIX, weights), (MOMENT1_PREFIX, m), (MOMENT2_PREFIX, v)):
            if name.startswith(prefix):
                target[name[len(prefix):]] = array
                break
        else:
            raise CheckpointError(f"{path}: unexpected tensor '{name}'")

    optimizer = None
    if header.get("optimizer_step") is not None:
        optimizer = AdamWState(m=m, v=v, step=int(header["optimizer_step"]))
    return Checkpoint(
        model_config=ModelConfig.build(**header["model_config"]),
        weights=weights,
        step=int(header["step"]),
        seed=int(header["seed"]),
        stage=header["stage"],
        optimizer=optimizer,
        vocab_fingerprint=header.get("vocab_fingerprint"),
        sampler_state=header.get("sampler_state"),
        train_config=header.get("train_config"),
        version=version,
        extra=header.get("extra") or {},
    )


def check_vocabulary(ckpt: Checkpoint, vocab, path: str) -> None:
    """Refuses a vocabulary other than the one the checkpoint was trained with."""
    if ckpt.vocab_fingerprint is not None and ckpt.vocab_fingerprint != vocab.fingerprint():
        logger.error(f"❌ Vocabulary does not match the one recorded in {path}")
        raise VocabularyError(f"{path} was trained with a different vocabulary")
    if len(vocab) != ckpt.model_config.vocab_size:
        raise VocabularyError(
            f"vocabulary has {len(vocab)} tokens but {path} expects {ckpt.model_config.vocab_size}"
        )


def load_encoder(path: str, vocab=None) -> tuple:
    """(EncoderState, Checkpoint) from `path`, checked against `vocab` when given."""
    ckpt = load_checkpoint(path)
    if vocab is not None:
        check_vocabulary(ckpt, vocab, path)
    return ckpt.to_state(), ckpt
