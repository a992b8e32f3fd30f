# tests/data_pipeline/test_tokenizer.py
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src import config
from src.data_pipeline.tokenizer import (Vocabulary, detokenize, load_vocab, pad_batch, pre_split, tokenize,
                                         wordpiece)
from src.exceptions import ShapeError, VocabularyError
from tests.conftest import TOY_TOKENS


def test_empty_text_is_cls_sep(toy_vocab):
    seq = tokenize("", toy_vocab, max_len=16)
    assert seq.token_ids == [toy_vocab.cls_id, toy_vocab.sep_id]
    assert seq.word_ids == [config.SPECIAL_WORD_ID] * 2
    assert seq.attention_mask == [1, 1]


def test_greedy_longest_match_shares_word_id(toy_vocab):
    assert wordpiece("unaffable", toy_vocab) == ["un", "##aff", "##able"]
    seq = tokenize("The unaffable cat", toy_vocab, max_len=16)
    tokens = [toy_vocab.tokens[i] for i in seq.token_ids]
    assert tokens == ["[CLS]", "the", "un", "##aff", "##able", "cat", "[SEP]"]
    assert seq.word_ids == [-1, 0, 1, 1, 1, 2, -1]


def test_unmatchable_word_becomes_unk(toy_vocab):
    assert wordpiece("zebra", toy_vocab) == [config.UNK_TOKEN]
    assert wordpiece("a" * (config.MAX_CHARS_PER_WORD + 1), toy_vocab) == [config.UNK_TOKEN]


def test_punctuation_is_its_own_word():
    assert pre_split("The cat, the DOG.") == ["the", "cat", ",", "the", "dog", "."]


def test_truncation_keeps_initial_tokens(toy_vocab):
    seq = tokenize("the cat sat on the mat . the dog sat", toy_vocab, max_len=6)
    tokens = [toy_vocab.tokens[i] for i in seq.token_ids]
    assert tokens == ["[CLS]", "the", "cat", "sat", "on", "[SEP]"]


def test_truncation_may_split_a_word(toy_vocab):
    seq = tokenize("cat unaffable", toy_vocab, max_len=4)
    assert [toy_vocab.tokens[i] for i in seq.token_ids] == ["[CLS]", "cat", "un", "[SEP]"]


def test_max_len_must_fit_specials(toy_vocab):
    with pytest.raises(ShapeError, match="room for"):
        tokenize("cat", toy_vocab, max_len=1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["the", "cat", "running", "unaffable", "zebra", ".", "mat"]), max_size=40),
       st.integers(min_value=2, max_value=24))
def test_length_never_exceeds_max_len(words, max_len):
    vocab = Vocabulary.from_tokens(TOY_TOKENS)
    seq = tokenize(" ".join(words), vocab, max_len)
    assert 2 <= len(seq) <= max_len
    assert seq.token_ids[0] == vocab.cls_id and seq.token_ids[-1] == vocab.sep_id
    assert len(seq.word_ids) == len(seq.token_ids) == len(seq.attention_mask)


def test_detokenize_joins_pieces(toy_vocab):
    seq = tokenize("the dog running", toy_vocab, max_len=16)
    assert detokenize(seq.token_ids, toy_vocab) == "the dog running"


def test_pad_batch_right_pads(toy_vocab):
    batch = pad_batch([tokenize("cat", toy_vocab, 8), tokenize("the cat sat", toy_vocab, 8)], pad_id=toy_vocab.pad_id)
    assert batch.shape == (2, 5)
    assert batch.attention_mask.tolist() == [[1, 1, 1, 0, 0], [1, 1, 1, 1, 1]]
    assert batch.input_ids[0, 3:].tolist() == [toy_vocab.pad_id] * 2
    assert batch.word_ids[0, 3:].tolist() == [config.SPECIAL_WORD_ID] * 2


@pytest.mark.parametrize("tokens, message", [
    (TOY_TOKENS + ["cat"], "Duplicate token 'cat'"),
    ([t for t in TOY_TOKENS if t != config.MASK_TOKEN], r"missing special token '\[MASK\]'"),
    (TOY_TOKENS[1:2] + TOY_TOKENS[:1] + TOY_TOKENS[2:], "must have id 0"),
])
def test_invalid_vocabularies(tokens, message):
    with pytest.raises(VocabularyError, match=message):
        Vocabulary.from_tokens(tokens)


def test_vocab_file_ids_are_line_numbers(toy_vocab, tmp_path):
    path = tmp_path / "vocab.txt"
    toy_vocab.save(str(path))
    loaded = load_vocab(str(path))
    assert loaded.tokens == toy_vocab.tokens
    assert loaded.token_to_id["cat"] == TOY_TOKENS.index("cat")
    assert loaded.fingerprint() == toy_vocab.fingerprint()
    other = Vocabulary.from_tokens(TOY_TOKENS + ["extra"])
    assert other.fingerprint() != toy_vocab.fingerprint()
