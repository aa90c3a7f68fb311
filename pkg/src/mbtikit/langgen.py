"""Per-type masked-language-model fine-tuning and mask-fill text
generation.

Each personality type gets its own fine-tune of a case-sensitive
encoder with a masked-token head. Generation appends one mask slot at
a time, fills it, and slides the context window left when the sequence
hits capacity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import torch
from torch import nn

from .data import EncodedExample, batches
from .model import MaskedLanguageModel
from .preprocess import clean
from .tokenizer import Vocabulary
from .training import TrainingDivergedError, _to_tensors, lr_scale
from .types import MbtiType, all_types

log = logging.getLogger(__name__)

IGNORE_INDEX = -100


@dataclass(frozen=True)
class LmHyperparams:
    batch_size: int = 16
    learning_rate: float = 3e-5
    epochs: int = 10
    max_seq_len: int = 128
    warmup_proportion: float = 0.1
    weight_decay: float = 0.01
    mask_probability: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.mask_probability < 1:
            raise ValueError("mask_probability must be in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class LmBundle:
    type_label: MbtiType
    model: MaskedLanguageModel
    vocab: Vocabulary
    per_epoch_loss: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.per_epoch_loss[-1]


@dataclass(frozen=True)
class DecodeConfig:
    strategy: str = "greedy"  # "greedy" | "top_k_sampling"
    top_k: int = 10
    temperature: float = 1.0
    max_new_tokens: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in ("greedy", "top_k_sampling"):
            raise ValueError(f"unknown decode strategy {self.strategy!r}")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


def mask_for_training(
    token_ids: torch.Tensor,
    special_ids: frozenset[int],
    mask_id: int,
    vocab_size: int,
    mask_probability: float,
    generator: torch.Generator,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Standard masked-LM corruption.

    Each non-special token is independently selected with
    ``mask_probability``; of selected tokens 80% become the mask token,
    10% a random vocabulary token, 10% stay unchanged. Targets hold the
    original id at selected positions and IGNORE_INDEX elsewhere.
    """
    ids = token_ids.clone()
    special = torch.zeros_like(ids, dtype=torch.bool)
    for s in special_ids:
        special |= ids == s

    selected = (
        torch.rand(ids.shape, generator=generator) < mask_probability
    ) & ~special

    targets = torch.full_like(ids, IGNORE_INDEX)
    targets[selected] = ids[selected]

    roll = torch.rand(ids.shape, generator=generator)
    replace_mask = selected & (roll < 0.8)
    replace_random = selected & (roll >= 0.8) & (roll < 0.9)
    ids[replace_mask] = mask_id
    if replace_random.any():
        ids[replace_random] = torch.randint(
            vocab_size, (int(replace_random.sum()),), generator=generator
        )
    return ids, targets


def train_lm(
    model: MaskedLanguageModel,
    train_set: Sequence[EncodedExample],
    vocab: Vocabulary,
    hp: LmHyperparams,
) -> list[float]:
    """Fine-tune in place; returns mean masked-token cross-entropy per
    epoch. Same optimizer and schedule contract as the classifier."""
    if not train_set:
        raise ValueError("train_set must be non-empty")
    torch.manual_seed(hp.seed)
    gen = torch.Generator().manual_seed(hp.seed)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=hp.learning_rate, weight_decay=hp.weight_decay
    )
    steps_per_epoch = math.ceil(len(train_set) / hp.batch_size)
    total_steps = steps_per_epoch * hp.epochs
    schedule = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda step: lr_scale(step, total_steps, hp.warmup_proportion),
    )
    criterion = nn.CrossEntropyLoss(ignore_index=IGNORE_INDEX)

    model.train()
    history: list[float] = []
    step = 0
    for epoch in range(hp.epochs):
        loss_sum = 0.0
        token_sum = 0
        for batch_id, batch in enumerate(
            batches(train_set, hp.batch_size, shuffle_seed=hp.seed + epoch)
        ):
            ids, mask, _ = _to_tensors(batch)
            masked, targets = mask_for_training(
                ids,
                vocab.special_ids,
                vocab.mask_id,
                len(vocab),
                hp.mask_probability,
                gen,
            )
            n_targets = int((targets != IGNORE_INDEX).sum())
            if n_targets == 0:
                continue
            optimizer.zero_grad()
            logits = model(masked, mask)
            loss = criterion(
                logits.view(-1, logits.shape[-1]), targets.view(-1)
            )
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    step, schedule.get_last_lr()[0], batch_id
                )
            loss.backward()
            optimizer.step()
            schedule.step()
            loss_sum += loss.item() * n_targets
            token_sum += n_targets
            step += 1
        history.append(loss_sum / max(token_sum, 1))
    model.eval()
    return history


def fine_tune_for_type(
    type_label: MbtiType,
    model: MaskedLanguageModel,
    train_set: Sequence[EncodedExample],
    vocab: Vocabulary,
    hp: LmHyperparams,
) -> LmBundle:
    history = train_lm(model, train_set, vocab, hp)
    return LmBundle(
        type_label=type_label, model=model, vocab=vocab, per_epoch_loss=history
    )


@torch.no_grad()
def generate(
    bundle: LmBundle,
    prompt: str,
    cfg: DecodeConfig,
    max_seq_len: int | None = None,
) -> str:
    """Iterative mask-fill decoding.

    Appends one mask token, runs the model, fills the slot per the
    decode strategy, and repeats until ``max_new_tokens`` tokens are
    out, a separator is produced, or forever sliding the window left
    once the sequence reaches capacity. Deterministic under cfg.seed.
    """
    vocab = bundle.vocab
    model = bundle.model
    model.eval()
    max_seq_len = max_seq_len or model.cfg.max_seq_len

    doc = clean(prompt, preserve_case=True)
    context = vocab.encode_tokens(doc.tokens_text)
    if not context:
        raise ValueError("prompt cleans to zero tokens")
    if len(context) > max_seq_len - 2:
        log.warning(
            "prompt of %d tokens exceeds window %d; keeping the tail",
            len(context), max_seq_len - 2,
        )
        context = context[-(max_seq_len - 2):]

    gen = torch.Generator().manual_seed(cfg.seed)
    banned = [vocab.pad_id, vocab.cls_id, vocab.mask_id, vocab.unk_id]
    generated: list[int] = []

    while len(generated) < cfg.max_new_tokens:
        if len(context) > max_seq_len - 2:
            context = context[-(max_seq_len - 2):]  # slide window left
        seq = [vocab.cls_id] + context + [vocab.mask_id]
        ids = torch.tensor([seq], dtype=torch.long)
        mask = torch.ones_like(ids)
        logits = bundle.model(ids, mask)[0, -1, :].clone()
        logits[banned] = float("-inf")
        if cfg.strategy == "greedy":
            token = int(torch.argmax(logits).item())
        else:
            logits = logits / cfg.temperature
            top = torch.topk(logits, min(cfg.top_k, logits.shape[-1]))
            probs = torch.softmax(top.values, dim=-1)
            pick = int(torch.multinomial(probs, 1, generator=gen).item())
            token = int(top.indices[pick].item())
        if token == vocab.sep_id:
            break
        generated.append(token)
        context.append(token)

    return vocab.decode(generated)


class LossTableError(ValueError):
    """Bundle set does not cover the 16 types exactly once."""


def loss_table(
    bundles: Sequence[LmBundle],
) -> dict:
    """Final-loss table in canonical type order plus the extrovert vs
    introvert group means used in the qualitative comparison."""
    by_type: dict[str, LmBundle] = {}
    for b in bundles:
        key = b.type_label.letters
        if key in by_type:
            raise LossTableError(f"duplicate bundle for {key}")
        by_type[key] = b
    expected = [t.letters for t in all_types()]
    missing = [t for t in expected if t not in by_type]
    if missing:
        raise LossTableError(f"missing bundles for {', '.join(missing)}")

    rows = [(t, by_type[t].final_loss) for t in expected]
    e_losses = [loss for t, loss in rows if t.startswith("E")]
    i_losses = [loss for t, loss in rows if t.startswith("I")]
    return {
        "rows": rows,
        "extrovert_mean_loss": sum(e_losses) / len(e_losses),
        "introvert_mean_loss": sum(i_losses) / len(i_losses),
    }
