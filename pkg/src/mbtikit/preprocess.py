"""Corpus cleaning: symbol stripping, punctuation spacing, clitic
splitting, type-mention masking, optional lowercasing.

The full pipeline is ``clean()``; the stages are exposed separately so
each can be tested on its own. Every stage normalizes whitespace to
single spaces, which is what makes the pipeline idempotent.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass

from .types import all_types

TYPE_PLACEHOLDER = "<type>"

# ASCII punctuation; forum text after symbol stripping contains nothing
# outside this set except letters, digits, and whitespace.
PUNCTUATION = set(string.punctuation)

_PLACEHOLDER_SPLIT = re.compile(r"(<type>)")

_CLITIC_RE = re.compile(r"(?<=[A-Za-z])'(re|ll|ve|d|s|m)\b", re.IGNORECASE)
_NT_RE = re.compile(r"(?<=[A-Za-z])n't\b", re.IGNORECASE)

_TYPE_MENTION_RE = re.compile(
    r"\b(?:" + "|".join(t.letters for t in all_types()) + r")s?\b",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class CleanDocument:
    """A cleaned post: space-joined tokens plus the case flag that
    records which pipeline variant produced it."""

    tokens_text: str
    preserve_case: bool

    @property
    def tokens(self) -> list[str]:
        return self.tokens_text.split()


def _collapse_ws(text: str) -> str:
    return " ".join(text.split())


def strip_symbols(text: str) -> str:
    """Drop every character that is not a letter, digit, ASCII
    punctuation mark, or whitespace; collapse whitespace runs."""
    kept = [
        ch
        for ch in text
        if ch.isalnum() or ch in PUNCTUATION or ch.isspace()
    ]
    return _collapse_ws("".join(kept))


def space_punctuation(text: str) -> str:
    """Isolate each punctuation character as its own token.

    Two exemptions keep the pipeline coherent: an apostrophe directly
    followed by a letter stays attached (clitic splitting owns those),
    and the literal ``<type>`` placeholder is never broken apart.
    """
    out_parts = []
    for part in _PLACEHOLDER_SPLIT.split(text):
        if part == TYPE_PLACEHOLDER:
            out_parts.append(f" {part} ")
            continue
        chars = []
        for i, ch in enumerate(part):
            if ch in PUNCTUATION:
                nxt = part[i + 1] if i + 1 < len(part) else ""
                if ch == "'" and nxt.isalpha():
                    chars.append(ch)
                else:
                    chars.append(f" {ch} ")
            else:
                chars.append(ch)
        out_parts.append("".join(chars))
    return _collapse_ws("".join(out_parts))


def split_clitics(text: str) -> str:
    """Split apostrophe contractions ('re 'll 've 'd 's 'm, n't) into
    separate tokens, e.g. "you're" -> "you 're"."""
    text = _NT_RE.sub(" n't", text)
    text = _CLITIC_RE.sub(lambda m: " '" + m.group(1), text)
    return _collapse_ws(text)


def mask_type_mentions(text: str) -> str:
    """Replace every standalone MBTI code (any case, optional plural
    "s") with the ``<type>`` placeholder."""
    return _TYPE_MENTION_RE.sub(TYPE_PLACEHOLDER, text)


def clean(text: str, preserve_case: bool = False) -> CleanDocument:
    """Run the full cleaning pipeline.

    Lowercasing is skipped when ``preserve_case`` is true (the
    generation models are case-sensitive; the classifier corpus is not).
    """
    out = strip_symbols(text)
    out = space_punctuation(out)
    out = split_clitics(out)
    out = mask_type_mentions(out)
    if not preserve_case:
        # lowercasing a few Unicode letters introduces combining marks;
        # re-strip so cleaning stays idempotent
        out = strip_symbols(out.lower())
    return CleanDocument(tokens_text=_collapse_ws(out), preserve_case=preserve_case)
