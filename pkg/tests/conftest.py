# tests/conftest.py
"""Shared fixtures: a toy vocabulary, tiny encoder configs and 64-bit mode for gradient checks."""
import numpy as np
import pytest

from src import config
from src.core import tensor as T
from src.data_pipeline.synthetic import build_vocabulary, make_lexicon
from src.data_pipeline.tokenizer import Vocabulary
from src.model.config import ModelConfig
from src.model.encoder import init_model

TOY_TOKENS = list(config.SPECIAL_TOKENS) + [
    ".", ",", "the", "cat", "dog", "sat", "on", "mat", "run", "##ning", "un", "##aff", "##able", "a", "b",
]


@pytest.fixture
def float64():
    with T.default_dtype(np.float64):
        yield


@pytest.fixture
def toy_vocab() -> Vocabulary:
    return Vocabulary.from_tokens(TOY_TOKENS)


@pytest.fixture
def tiny_config(toy_vocab) -> ModelConfig:
    """2 layers, hidden 8, 2 heads of width 4, dropout off."""
    return ModelConfig.build(layers=2, hidden=8, heads=2, head_dim=4, vocab_size=len(toy_vocab),
                             dropout=0.0, attention_dropout=0.0)


@pytest.fixture
def tiny_model(tiny_config, float64):
    return init_model(tiny_config, seed=0)


@pytest.fixture(scope="session")
def lexicon():
    return make_lexicon(seed=0)


@pytest.fixture(scope="session")
def synthetic_vocab(lexicon) -> Vocabulary:
    return build_vocabulary(lexicon)
