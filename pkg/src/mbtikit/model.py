"""Bidirectional transformer encoder with classification and
masked-token heads, plus checkpoint persistence.

Two presets: "paper" matches the fine-tuned model's published
architecture (12 layers, hidden 768); "tiny" preserves every
architectural contract at test speed.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch import nn

from .tokenizer import Vocabulary
from .types import all_types

NUM_CLASSES = 16


@dataclass(frozen=True)
class EncoderConfig:
    num_layers: int = 12
    hidden_size: int = 768
    num_heads: int = 12
    ff_size: int | None = None  # defaults to 4 * hidden_size
    dropout: float = 0.1
    attention_dropout: float = 0.1
    max_seq_len: int = 128
    case_sensitive: bool = False
    vocab_ref: str = "v1"
    vocab_size: int = 30522

    def __post_init__(self) -> None:
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if not 0 <= self.attention_dropout < 1:
            raise ValueError("attention_dropout must be in [0, 1)")
        if self.hidden_size % self.num_heads:
            raise ValueError("hidden_size must be divisible by num_heads")

    @property
    def feedforward_size(self) -> int:
        return self.ff_size if self.ff_size is not None else 4 * self.hidden_size


def paper_config(vocab_size: int, case_sensitive: bool = False) -> EncoderConfig:
    return EncoderConfig(
        num_layers=12,
        hidden_size=768,
        num_heads=12,
        max_seq_len=128,
        case_sensitive=case_sensitive,
        vocab_size=vocab_size,
    )


def tiny_config(vocab_size: int, case_sensitive: bool = False) -> EncoderConfig:
    return EncoderConfig(
        num_layers=2,
        hidden_size=64,
        num_heads=2,
        max_seq_len=32,
        case_sensitive=case_sensitive,
        vocab_size=vocab_size,
    )


PRESETS = {"paper": paper_config, "tiny": tiny_config}


class EncoderLayer(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.attn = nn.MultiheadAttention(
            cfg.hidden_size,
            cfg.num_heads,
            dropout=cfg.attention_dropout,
            batch_first=True,
        )
        self.attn_norm = nn.LayerNorm(cfg.hidden_size)
        self.ff = nn.Sequential(
            nn.Linear(cfg.hidden_size, cfg.feedforward_size),
            nn.GELU(),
            nn.Linear(cfg.feedforward_size, cfg.hidden_size),
        )
        self.ff_norm = nn.LayerNorm(cfg.hidden_size)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        attn_out, _ = self.attn(
            x, x, x, key_padding_mask=pad_mask, need_weights=False
        )
        x = self.attn_norm(x + self.dropout(attn_out))
        x = self.ff_norm(x + self.dropout(self.ff(x)))
        return x


class Encoder(nn.Module):
    """Token + position embeddings followed by self-attention layers."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.token_emb = nn.Embedding(cfg.vocab_size, cfg.hidden_size, padding_idx=0)
        self.pos_emb = nn.Embedding(cfg.max_seq_len, cfg.hidden_size)
        self.emb_norm = nn.LayerNorm(cfg.hidden_size)
        self.dropout = nn.Dropout(cfg.dropout)
        self.layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.num_layers))

    def forward(
        self, token_ids: torch.Tensor, attention_mask: torch.Tensor
    ) -> torch.Tensor:
        positions = torch.arange(token_ids.shape[1], device=token_ids.device)
        x = self.token_emb(token_ids) + self.pos_emb(positions)
        x = self.dropout(self.emb_norm(x))
        pad_mask = attention_mask == 0
        for layer in self.layers:
            x = layer(x, pad_mask)
        return x


class SequenceClassifier(nn.Module):
    """16-way softmax head over the start-token representation."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.head = nn.Linear(cfg.hidden_size, NUM_CLASSES)

    def forward(
        self, token_ids: torch.Tensor, attention_mask: torch.Tensor
    ) -> torch.Tensor:
        hidden = self.encoder(token_ids, attention_mask)
        return self.head(hidden[:, 0, :])


class MaskedLanguageModel(nn.Module):
    """Vocabulary-sized prediction head over every position."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.head = nn.Linear(cfg.hidden_size, cfg.vocab_size)

    def forward(
        self, token_ids: torch.Tensor, attention_mask: torch.Tensor
    ) -> torch.Tensor:
        hidden = self.encoder(token_ids, attention_mask)
        return self.head(hidden)


class WeightShapeError(ValueError):
    """Pretrained weights do not match the requested configuration."""


def init_classifier(
    config: EncoderConfig,
    pretrained: dict | None = None,
    seed: int = 0,
) -> SequenceClassifier:
    """Seed-initialized classifier; the head is always fresh, the
    encoder optionally loads pretrained weights."""
    torch.manual_seed(seed)
    model = SequenceClassifier(config)
    if pretrained is not None:
        _load_encoder_weights(model.encoder, pretrained)
    return model


def init_mlm(
    config: EncoderConfig,
    pretrained: dict | None = None,
    seed: int = 0,
) -> MaskedLanguageModel:
    torch.manual_seed(seed)
    model = MaskedLanguageModel(config)
    if pretrained is not None:
        _load_encoder_weights(model.encoder, pretrained)
    return model


def _load_encoder_weights(encoder: Encoder, state: dict) -> None:
    own = encoder.state_dict()
    for name, tensor in state.items():
        if name not in own:
            raise WeightShapeError(f"unexpected weight {name}")
        if own[name].shape != tensor.shape:
            raise WeightShapeError(
                f"shape mismatch for {name}: "
                f"config expects {tuple(own[name].shape)}, "
                f"weights have {tuple(tensor.shape)}"
            )
    encoder.load_state_dict(state)


# --- checkpoint layout: config.json + weights.pt + vocab.json + loss csv ---


def save_checkpoint(
    directory: str | Path,
    model: nn.Module,
    vocab: Vocabulary,
    hyperparams: dict | None = None,
    loss_history: list[float] | None = None,
    extra: dict | None = None,
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "model_kind": type(model).__name__,
        "encoder_config": dataclasses.asdict(model.cfg),
        "hyperparams": hyperparams or {},
    }
    meta.update(extra or {})
    (directory / "config.json").write_text(json.dumps(meta, indent=2))
    torch.save(model.state_dict(), directory / "weights.pt")
    vocab.save(directory / "vocab.json")
    if loss_history is not None:
        with (directory / "loss_history.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "mean_loss"])
            for i, loss in enumerate(loss_history, start=1):
                writer.writerow([i, repr(loss)])


def load_checkpoint(directory: str | Path) -> tuple[nn.Module, Vocabulary, dict]:
    directory = Path(directory)
    meta = json.loads((directory / "config.json").read_text())
    cfg = EncoderConfig(**meta["encoder_config"])
    kind = meta["model_kind"]
    if kind == "SequenceClassifier":
        model: nn.Module = SequenceClassifier(cfg)
    elif kind == "MaskedLanguageModel":
        model = MaskedLanguageModel(cfg)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    model.load_state_dict(torch.load(directory / "weights.pt", weights_only=True))
    model.eval()
    vocab = Vocabulary.load(directory / "vocab.json")
    return model, vocab, meta
