"""MBTI type algebra: the four dichotomies and the 16 four-letter codes.

Everything downstream (labels, metrics, reports) goes through these
values, so they are deliberately tiny and pure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class Axis:
    """One of the four binary dichotomies."""

    index: int
    letters: tuple[str, str]

    @property
    def name(self) -> str:
        return f"{self.letters[0]}/{self.letters[1]}"


# Canonical letter order per axis; position i of a type code is drawn
# from AXES[i].letters.
AXES: tuple[Axis, ...] = (
    Axis(0, ("E", "I")),
    Axis(1, ("N", "S")),
    Axis(2, ("F", "T")),
    Axis(3, ("P", "J")),
)


class InvalidTypeError(ValueError):
    """Raised when a string is not a valid 4-letter personality code."""


@dataclass(frozen=True, order=True)
class MbtiType:
    """A four-letter personality code, one letter per axis."""

    letters: str

    def __post_init__(self) -> None:
        if len(self.letters) != 4:
            raise InvalidTypeError(
                f"type code must have exactly 4 letters, got {self.letters!r}"
            )
        for axis, ch in zip(AXES, self.letters):
            if ch not in axis.letters:
                raise InvalidTypeError(
                    f"letter {ch!r} not valid at position {axis.index} "
                    f"(expected one of {axis.letters})"
                )

    def __str__(self) -> str:
        return self.letters

    def axis_letter(self, axis: Axis) -> str:
        return self.letters[axis.index]


def parse_type(s: str) -> MbtiType:
    """Parse a type code case-insensitively; raises InvalidTypeError."""
    if not isinstance(s, str):
        raise InvalidTypeError(f"expected string, got {type(s).__name__}")
    return MbtiType(s.strip().upper())


def format_type(t: MbtiType) -> str:
    """Wire format: the 4 uppercase letters."""
    return t.letters


def match_count(a: MbtiType, b: MbtiType) -> int:
    """Number of axes on which the two types agree (0..4)."""
    return sum(x == y for x, y in zip(a.letters, b.letters))


def axis_letter(t: MbtiType, axis: Axis) -> str:
    return t.axis_letter(axis)


@lru_cache(maxsize=1)
def all_types() -> tuple[MbtiType, ...]:
    """All 16 types in lexicographic order of their letter strings."""
    combos = itertools.product(*(axis.letters for axis in AXES))
    return tuple(sorted(MbtiType("".join(c)) for c in combos))


def type_index(t: MbtiType) -> int:
    """Dense label id 0..15 in all_types() order."""
    return all_types().index(t)
