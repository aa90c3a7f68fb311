"""Classifier fine-tuning: cross-entropy over mini-batches with the
adaptive-moment optimizer, decoupled weight decay, and a linear
warmup-then-decay learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from .data import EncodedExample, batches, encode
from .model import EncoderConfig, SequenceClassifier, init_classifier
from .tokenizer import Vocabulary
from .types import MbtiType, all_types


@dataclass(frozen=True)
class TrainHyperparams:
    learning_rate: float = 1e-5
    max_seq_len: int = 128
    epochs: int = 5
    batch_size: int = 32
    warmup_proportion: float = 0.1
    weight_decay: float = 0.01
    freeze_encoder: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.warmup_proportion < 1:
            raise ValueError("warmup_proportion must be in [0, 1)")


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, step: int, lr: float, batch_id: int):
        super().__init__(
            f"non-finite loss at step {step} (lr {lr:.3e}, batch {batch_id})"
        )
        self.step = step
        self.lr = lr
        self.batch_id = batch_id


def lr_scale(step: int, total_steps: int, warmup_proportion: float) -> float:
    """Fraction of peak lr at 0-based ``step``.

    Rises linearly from 1/warmup_steps at step 0 to 1.0 at the last
    warmup step, then decays linearly to 0 at the final step.
    """
    warmup_steps = max(1, math.ceil(warmup_proportion * total_steps))
    if step + 1 <= warmup_steps:
        return (step + 1) / warmup_steps
    if total_steps == warmup_steps:
        return 1.0
    return max(0.0, (total_steps - (step + 1)) / (total_steps - warmup_steps))


def _to_tensors(
    batch: Sequence[EncodedExample],
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    ids = torch.tensor([ex.token_ids for ex in batch], dtype=torch.long)
    mask = torch.tensor([ex.attention_mask for ex in batch], dtype=torch.long)
    labels = torch.tensor([ex.label_id for ex in batch], dtype=torch.long)
    return ids, mask, labels


def train_classifier(
    model: SequenceClassifier,
    train_set: Sequence[EncodedExample],
    hp: TrainHyperparams,
) -> list[float]:
    """Train in place; returns mean cross-entropy per epoch."""
    if not train_set:
        raise ValueError("train_set must be non-empty")
    torch.manual_seed(hp.seed)
    params = (
        model.head.parameters() if hp.freeze_encoder else model.parameters()
    )
    optimizer = torch.optim.AdamW(
        params, lr=hp.learning_rate, weight_decay=hp.weight_decay
    )
    steps_per_epoch = math.ceil(len(train_set) / hp.batch_size)
    total_steps = steps_per_epoch * hp.epochs
    schedule = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda step: lr_scale(step, total_steps, hp.warmup_proportion),
    )
    criterion = nn.CrossEntropyLoss()

    model.train()
    history: list[float] = []
    step = 0
    for epoch in range(hp.epochs):
        total_loss = 0.0
        for batch_id, batch in enumerate(
            batches(train_set, hp.batch_size, shuffle_seed=hp.seed + epoch)
        ):
            ids, mask, labels = _to_tensors(batch)
            optimizer.zero_grad()
            loss = criterion(model(ids, mask), labels)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    step, schedule.get_last_lr()[0], batch_id
                )
            loss.backward()
            optimizer.step()
            schedule.step()
            total_loss += loss.item() * len(batch)
            step += 1
        history.append(total_loss / len(train_set))
    model.eval()
    return history


@torch.no_grad()
def predict(
    model: SequenceClassifier,
    text: str,
    vocab: Vocabulary,
    max_seq_len: int | None = None,
) -> tuple[MbtiType, list[float]]:
    """Predicted type plus the 16 class probabilities in canonical
    order. Dropout is disabled; ties break toward canonical order."""
    model.eval()
    max_seq_len = max_seq_len or model.cfg.max_seq_len
    ex = encode(text, vocab, max_seq_len)
    ids, mask, _ = _to_tensors([ex])
    probs = torch.softmax(model(ids, mask)[0], dim=-1)
    idx = int(torch.argmax(probs).item())
    return all_types()[idx], probs.tolist()


@torch.no_grad()
def predict_batch(
    model: SequenceClassifier, dataset: Sequence[EncodedExample], batch_size: int = 64
) -> list[MbtiType]:
    model.eval()
    types = all_types()
    out: list[MbtiType] = []
    for batch in batches(dataset, batch_size):
        ids, mask, _ = _to_tensors(batch)
        preds = torch.argmax(model(ids, mask), dim=-1)
        out.extend(types[int(i)] for i in preds)
    return out


def exact_accuracy_on(
    model: SequenceClassifier, dataset: Sequence[EncodedExample]
) -> float:
    preds = predict_batch(model, dataset)
    types = all_types()
    hits = sum(
        p == types[ex.label_id] for p, ex in zip(preds, dataset)
    )
    return hits / len(dataset)


def run_grid(
    grid: Sequence[TrainHyperparams],
    config: EncoderConfig,
    train_set: Sequence[EncodedExample],
    test_set: Sequence[EncodedExample],
) -> list[tuple[TrainHyperparams, float]]:
    """Train one independently seeded model per row; rows come back in
    grid order with held-out exact accuracy."""
    results = []
    for hp in grid:
        model = init_classifier(config, seed=hp.seed)
        try:
            train_classifier(model, train_set, hp)
            acc = exact_accuracy_on(model, test_set)
        except TrainingDivergedError:
            acc = float("nan")
        results.append((hp, acc))
    return results
