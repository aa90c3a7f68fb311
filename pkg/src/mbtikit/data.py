"""Dataset assembly: stratified 85-15 splitting, fixed-length encoding
with special tokens, and seeded batch iteration."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterator, Sequence

from .tokenizer import Vocabulary
from .types import MbtiType, type_index

DEFAULT_TRAIN_FRACTION = 0.85


@dataclass(frozen=True)
class LabeledExample:
    text: str
    label: MbtiType


@dataclass(frozen=True)
class EncodedExample:
    token_ids: tuple[int, ...]
    attention_mask: tuple[int, ...]
    label_id: int


class SplitError(ValueError):
    """Raised when the corpus cannot be stratified."""


def split_corpus(
    examples: Sequence[LabeledExample],
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    seed: int = 0,
) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """Deterministic stratified split: each label is split
    train_fraction independently, rounding toward train."""
    if not examples:
        raise SplitError("cannot split an empty example list")
    by_label: dict[str, list[LabeledExample]] = {}
    for ex in examples:
        by_label.setdefault(ex.label.letters, []).append(ex)

    rng = random.Random(seed)
    train: list[LabeledExample] = []
    test: list[LabeledExample] = []
    for letters in sorted(by_label):
        group = list(by_label[letters])
        if len(group) < 2:
            raise SplitError(
                f"label {letters} has {len(group)} example(s); "
                "need at least 2 to stratify"
            )
        rng.shuffle(group)
        n_train = math.ceil(len(group) * train_fraction - 1e-9)
        n_train = min(max(n_train, 1), len(group) - 1)
        train.extend(group[:n_train])
        test.extend(group[n_train:])
    return train, test


def encode(
    text: str,
    vocab: Vocabulary,
    max_seq_len: int,
    label_id: int = 0,
) -> EncodedExample:
    """[CLS] + subword ids (tail-truncated) + [SEP] + zero padding."""
    if max_seq_len < 3:
        raise ValueError("max_seq_len must be at least 3 ([CLS], token, [SEP])")
    body = vocab.encode_tokens(text)[: max_seq_len - 2]
    ids = [vocab.cls_id] + body + [vocab.sep_id]
    mask = [1] * len(ids)
    pad = max_seq_len - len(ids)
    ids.extend([vocab.pad_id] * pad)
    mask.extend([0] * pad)
    return EncodedExample(
        token_ids=tuple(ids), attention_mask=tuple(mask), label_id=label_id
    )


def encode_examples(
    examples: Sequence[LabeledExample], vocab: Vocabulary, max_seq_len: int
) -> list[EncodedExample]:
    return [
        encode(ex.text, vocab, max_seq_len, label_id=type_index(ex.label))
        for ex in examples
    ]


def batches(
    dataset: Sequence[EncodedExample],
    batch_size: int,
    shuffle_seed: int | None = None,
) -> Iterator[list[EncodedExample]]:
    """One epoch of batches; every example exactly once, final partial
    batch included. Order is deterministic under the seed."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = list(range(len(dataset)))
    if shuffle_seed is not None:
        random.Random(shuffle_seed).shuffle(order)
    for start in range(0, len(order), batch_size):
        yield [dataset[i] for i in order[start:start + batch_size]]
