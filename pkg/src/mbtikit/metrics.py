"""Multi-granularity accuracy metrics over (predicted, actual) type
pairs: exact accuracy, at-least-k-of-4 accuracy, per-dichotomy
accuracy, and expected match count.

All aggregation is exact integer counting; fractions appear only in
the report, which makes the telescoping identity

    sum_k P(matches >= k) == E[matches] == sum_axes P(axis correct)

hold exactly rather than approximately.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .types import AXES, Axis, MbtiType, match_count, parse_type


class EmptyRecordsError(ValueError):
    """Metrics over zero records are undefined; refuse rather than NaN."""


class MetricIdentityError(AssertionError):
    """Internal counting identity violated (implementation bug)."""


@dataclass(frozen=True)
class PredictionRecord:
    predicted: MbtiType
    actual: MbtiType

    @property
    def matches(self) -> int:
        return match_count(self.predicted, self.actual)


@dataclass(frozen=True)
class MetricsReport:
    exact_accuracy: float
    at_least_k: dict[int, float]  # k in 1..4
    axis_accuracy: dict[str, float]  # axis name -> fraction
    expected_matches: float
    n_records: int


def _require(records: Sequence[PredictionRecord]) -> None:
    if not records:
        raise EmptyRecordsError("no prediction records")


def exact_accuracy(records: Sequence[PredictionRecord]) -> float:
    _require(records)
    return sum(r.matches == 4 for r in records) / len(records)


def at_least_k_accuracy(records: Sequence[PredictionRecord], k: int) -> float:
    _require(records)
    if k not in (1, 2, 3, 4):
        raise ValueError(f"k must be in 1..4, got {k}")
    return sum(r.matches >= k for r in records) / len(records)


def axis_accuracy(records: Sequence[PredictionRecord], axis: Axis) -> float:
    _require(records)
    return (
        sum(
            r.predicted.axis_letter(axis) == r.actual.axis_letter(axis)
            for r in records
        )
        / len(records)
    )


def expected_matches(records: Sequence[PredictionRecord]) -> float:
    _require(records)
    return sum(r.matches for r in records) / len(records)


def metrics_report(records: Sequence[PredictionRecord]) -> MetricsReport:
    """Aggregate every metric in one pass and assert the counting
    identities before returning."""
    _require(records)
    n = len(records)
    match_total = 0
    ge_counts = [0, 0, 0, 0]  # index k-1 -> count of matches >= k
    axis_counts = [0, 0, 0, 0]
    for r in records:
        m = r.matches
        match_total += m
        for k in range(1, m + 1):
            ge_counts[k - 1] += 1
        for axis in AXES:
            if r.predicted.axis_letter(axis) == r.actual.axis_letter(axis):
                axis_counts[axis.index] += 1

    if sum(ge_counts) != match_total or sum(axis_counts) != match_total:
        raise MetricIdentityError(
            f"counting identity violated: ge={ge_counts}, "
            f"axes={axis_counts}, total={match_total}"
        )

    return MetricsReport(
        exact_accuracy=ge_counts[3] / n,
        at_least_k={k: ge_counts[k - 1] / n for k in (1, 2, 3, 4)},
        axis_accuracy={ax.name: axis_counts[ax.index] / n for ax in AXES},
        expected_matches=match_total / n,
        n_records=n,
    )


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    """Read JSONL records {"pred": "INTP", "true": "INTJ"}."""
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            try:
                records.append(
                    PredictionRecord(
                        predicted=parse_type(rec["pred"]),
                        actual=parse_type(rec["true"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}")
    return records


def save_predictions(
    records: Iterable[PredictionRecord], path: str | Path
) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {"pred": r.predicted.letters, "true": r.actual.letters}
                )
                + "\n"
            )
