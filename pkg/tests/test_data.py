from collections import Counter

import pytest

from mbtikit.data import (
    LabeledExample,
    SplitError,
    batches,
    encode,
    split_corpus,
)
from mbtikit.types import all_types, parse_type

from conftest import synthetic_corpus


class TestSplitCorpus:
    def test_single_label_100(self):
        intj = parse_type("INTJ")
        examples = [LabeledExample(f"post {i}", intj) for i in range(100)]
        train, test = split_corpus(examples, 0.85, seed=1)
        assert (len(train), len(test)) == (85, 15)

    def test_sixteen_labels_100_each(self):
        examples = []
        for t in all_types():
            examples += [LabeledExample(f"{t} post {i}", t) for i in range(100)]
        train, test = split_corpus(examples, 0.85, seed=3)
        assert (len(train), len(test)) == (1360, 240)

    def test_deterministic_under_seed(self):
        examples = synthetic_corpus(20, seed=5)
        a = split_corpus(examples, seed=42)
        b = split_corpus(examples, seed=42)
        assert a == b

    def test_different_seed_differs(self):
        examples = synthetic_corpus(20, seed=5)
        a = split_corpus(examples, seed=1)
        b = split_corpus(examples, seed=2)
        assert a != b

    def test_disjoint_and_complete(self):
        examples = synthetic_corpus(13, seed=9)
        train, test = split_corpus(examples, seed=0)
        assert len(train) + len(test) == len(examples)
        assert Counter(train) + Counter(test) == Counter(examples)

    def test_stratified_within_one(self):
        examples = synthetic_corpus(40, seed=2)
        train, test = split_corpus(examples, 0.85, seed=0)
        per_label = Counter(ex.label for ex in train)
        for t in all_types():
            assert abs(per_label[t] - 34) <= 1  # 0.85 * 40 = 34

    def test_rare_label_errors(self):
        examples = [LabeledExample("only one", parse_type("ISFP"))]
        with pytest.raises(SplitError):
            split_corpus(examples)

    def test_empty_errors(self):
        with pytest.raises(SplitError):
            split_corpus([])


class TestEncode:
    def test_long_text_truncates(self, small_vocab):
        text = " ".join(["today"] * 500)
        ex = encode(text, small_vocab, 128)
        assert len(ex.token_ids) == 128
        assert ex.token_ids[0] == small_vocab.cls_id
        assert ex.token_ids[127] == small_vocab.sep_id
        body = small_vocab.encode_tokens(text)[:126]
        assert list(ex.token_ids[1:127]) == body

    def test_short_text_pads_with_zeros(self, small_vocab):
        ex = encode("today we go", small_vocab, 128)
        n_body = len(small_vocab.encode_tokens("today we go"))
        sep_pos = 1 + n_body
        assert ex.token_ids[sep_pos] == small_vocab.sep_id
        assert all(i == 0 for i in ex.token_ids[sep_pos + 1:])
        assert all(m == 0 for m in ex.attention_mask[sep_pos + 1:])
        assert all(m == 1 for m in ex.attention_mask[: sep_pos + 1])

    def test_empty_text(self, small_vocab):
        ex = encode("", small_vocab, 128)
        assert ex.token_ids[:2] == (small_vocab.cls_id, small_vocab.sep_id)
        assert all(i == 0 for i in ex.token_ids[2:])

    def test_min_length_rejected(self, small_vocab):
        with pytest.raises(ValueError):
            encode("x", small_vocab, 2)

    def test_contract_over_many_lengths(self, small_vocab):
        for n_words in range(0, 60, 3):
            for max_len in (8, 16, 33):
                text = " ".join(["maybe"] * n_words)
                ex = encode(text, small_vocab, max_len)
                assert len(ex.token_ids) == max_len
                assert len(ex.attention_mask) == max_len
                assert ex.token_ids[0] == small_vocab.cls_id
                assert sum(i == small_vocab.sep_id for i in ex.token_ids) == 1
                for i in range(1, max_len):
                    assert (ex.attention_mask[i] == 0) == (ex.token_ids[i] == 0)


class TestBatches:
    def test_sizes(self, small_vocab):
        ds = [encode("go", small_vocab, 8, label_id=0)] * 100
        sizes = [len(b) for b in batches(ds, 32, shuffle_seed=0)]
        assert sizes == [32, 32, 32, 4]

    def test_each_example_once(self, small_vocab):
        ds = [encode(f"go to {i}", small_vocab, 8, label_id=i % 16) for i in range(37)]
        seen = [ex for b in batches(ds, 5, shuffle_seed=7) for ex in b]
        assert Counter(seen) == Counter(ds)

    def test_deterministic(self, small_vocab):
        ds = [encode(f"go {i}", small_vocab, 8, label_id=0) for i in range(20)]
        a = [tuple(ex.token_ids for ex in b) for b in batches(ds, 6, shuffle_seed=3)]
        b = [tuple(ex.token_ids for ex in b) for b in batches(ds, 6, shuffle_seed=3)]
        assert a == b

    def test_batch_one(self, small_vocab):
        ds = [encode(f"go {i}", small_vocab, 8, label_id=0) for i in range(10)]
        assert [len(b) for b in batches(ds, 1, shuffle_seed=0)] == [1] * 10

    def test_invalid_batch_size(self, small_vocab):
        with pytest.raises(ValueError):
            list(batches([], 0))
