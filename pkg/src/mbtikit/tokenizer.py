"""Subword vocabulary with special tokens.

A byte-pair style vocabulary learned from a training corpus: words are
split into characters (continuation pieces carry a ``##`` prefix) and
the most frequent adjacent pairs are merged until the target size is
reached. Ships as a versioned JSON asset; tests build miniature
vocabularies from fixtures with the same special-token contract.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
MASK_TOKEN = "[MASK]"

SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN, MASK_TOKEN)

VOCAB_FORMAT_VERSION = 1


def _merge_symbol(a: str, b: str) -> str:
    return a + b.removeprefix("##")


@dataclass
class Vocabulary:
    """token -> dense id map; id 0 is reserved for padding."""

    token_to_id: dict[str, int]
    merges: list[tuple[str, str]] = field(default_factory=list)
    version: str = "v1"

    def __post_init__(self) -> None:
        for tok in SPECIAL_TOKENS:
            if tok not in self.token_to_id:
                raise ValueError(f"special token {tok} missing from vocabulary")
        if self.token_to_id[PAD_TOKEN] != 0:
            raise ValueError("padding token must have id 0")
        ids = sorted(self.token_to_id.values())
        if ids != list(range(len(ids))):
            raise ValueError("token ids must be dense starting at 0")
        self.id_to_token = {i: t for t, i in self.token_to_id.items()}
        self._merge_rank = {pair: i for i, pair in enumerate(self.merges)}
        self._word_cache: dict[str, list[str]] = {}

    def __len__(self) -> int:
        return len(self.token_to_id)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD_TOKEN]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK_TOKEN]

    @property
    def cls_id(self) -> int:
        return self.token_to_id[CLS_TOKEN]

    @property
    def sep_id(self) -> int:
        return self.token_to_id[SEP_TOKEN]

    @property
    def mask_id(self) -> int:
        return self.token_to_id[MASK_TOKEN]

    @property
    def special_ids(self) -> frozenset[int]:
        return frozenset(self.token_to_id[t] for t in SPECIAL_TOKENS)

    def _split_word(self, word: str) -> list[str]:
        if word in self._word_cache:
            return self._word_cache[word]
        symbols = [word[0]] + ["##" + ch for ch in word[1:]]
        while len(symbols) > 1:
            best, best_rank = None, None
            for i in range(len(symbols) - 1):
                rank = self._merge_rank.get((symbols[i], symbols[i + 1]))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best, best_rank = i, rank
            if best is None:
                break
            symbols[best:best + 2] = [
                _merge_symbol(symbols[best], symbols[best + 1])
            ]
        if any(s not in self.token_to_id for s in symbols):
            symbols = [UNK_TOKEN]
        self._word_cache[word] = symbols
        return symbols

    def tokenize(self, text: str) -> list[str]:
        """Whitespace-split then subword-split. Input is expected to be
        cleaned text (punctuation already isolated)."""
        pieces: list[str] = []
        for word in text.split():
            pieces.extend(self._split_word(word))
        return pieces

    def encode_tokens(self, text: str) -> list[int]:
        return [self.token_to_id[p] for p in self.tokenize(text)]

    def decode(self, ids: list[int], skip_special: bool = True) -> str:
        """Inverse of encode_tokens on in-vocabulary text: rejoin ##
        continuations, space-join words."""
        words: list[str] = []
        for i in ids:
            tok = self.id_to_token[i]
            if skip_special and tok in SPECIAL_TOKENS:
                continue
            if tok.startswith("##") and words:
                words[-1] += tok[2:]
            else:
                words.append(tok)
        return " ".join(words)

    def save(self, path: str | Path) -> None:
        payload = {
            "format_version": VOCAB_FORMAT_VERSION,
            "version": self.version,
            "tokens": [
                self.id_to_token[i] for i in range(len(self.token_to_id))
            ],
            "merges": [list(m) for m in self.merges],
        }
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            token_to_id={t: i for i, t in enumerate(payload["tokens"])},
            merges=[tuple(m) for m in payload["merges"]],
            version=payload.get("version", "v1"),
        )


def build_vocab(
    texts: list[str], size: int = 1000, version: str = "v1"
) -> Vocabulary:
    """Learn a subword vocabulary from cleaned texts.

    Specials and all single characters (plus their ## forms) seed the
    vocabulary so any word over the training alphabet stays encodable;
    merges are added by descending pair frequency until ``size``.
    """
    word_freq = Counter(w for t in texts for w in t.split())
    words = {
        w: [w[0]] + ["##" + ch for ch in w[1:]] for w in word_freq
    }

    tokens: list[str] = list(SPECIAL_TOKENS)
    seen = set(tokens)
    for w in sorted(word_freq):
        for sym in words[w]:
            if sym not in seen:
                seen.add(sym)
                tokens.append(sym)

    merges: list[tuple[str, str]] = []
    while len(tokens) < size:
        pair_freq: Counter[tuple[str, str]] = Counter()
        for w, syms in words.items():
            f = word_freq[w]
            for a, b in zip(syms, syms[1:]):
                pair_freq[(a, b)] += f
        if not pair_freq:
            break
        # deterministic tie-break: frequency desc, then lexicographic
        (a, b), freq = min(
            pair_freq.items(), key=lambda kv: (-kv[1], kv[0])
        )
        if freq < 2:
            break
        merged = _merge_symbol(a, b)
        merges.append((a, b))
        if merged not in seen:
            seen.add(merged)
            tokens.append(merged)
        for w, syms in words.items():
            i = 0
            while i < len(syms) - 1:
                if syms[i] == a and syms[i + 1] == b:
                    syms[i:i + 2] = [merged]
                else:
                    i += 1

    return Vocabulary(
        token_to_id={t: i for i, t in enumerate(tokens)},
        merges=merges,
        version=version,
    )
