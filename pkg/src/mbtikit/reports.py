"""Markdown and CSV report emitters shaped like the published result
tables: hyperparameter grid, at-least-k matches, per-dichotomy
accuracies, and per-type generation losses."""

from __future__ import annotations

import csv
import io
from typing import Sequence

from .metrics import MetricsReport
from .training import TrainHyperparams
from .types import AXES


def _md_table(header: list[str], rows: list[list[str]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
    ]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines)


def grid_section(results: Sequence[tuple[TrainHyperparams, float]]) -> str:
    rows = [
        [f"{hp.learning_rate:g}", str(hp.max_seq_len), str(hp.epochs), f"{acc:.4f}"]
        for hp, acc in results
    ]
    return "## Hyperparameter grid\n\n" + _md_table(
        ["Learn. Rate", "Max Seq.", "Epochs", "Acc."], rows
    )


def matches_section(report: MetricsReport) -> str:
    header = [f"At least {k} match{'es' if k > 1 else ''}" for k in (1, 2, 3, 4)]
    row = [f"{report.at_least_k[k]:.4f}" for k in (1, 2, 3, 4)]
    return (
        "## Correctly predicted letters\n\n"
        + _md_table(header, [row])
        + f"\n\nExpected number of matches: **{report.expected_matches:.4f}** "
        f"(n={report.n_records})"
    )


def axes_section(report: MetricsReport) -> str:
    header = [ax.name for ax in AXES]
    row = [f"{report.axis_accuracy[ax.name]:.4f}" for ax in AXES]
    return "## Individual category accuracies\n\n" + _md_table(header, [row])


def metrics_sections(report: MetricsReport) -> str:
    return (
        f"Exact accuracy: **{report.exact_accuracy:.4f}**\n\n"
        + matches_section(report)
        + "\n\n"
        + axes_section(report)
    )


def loss_table_section(table: dict, corpus_sizes: dict[str, int] | None = None) -> str:
    rows = []
    for type_code, loss in table["rows"]:
        row = [type_code, f"{loss:.6g}"]
        if corpus_sizes is not None:
            row.append(str(corpus_sizes.get(type_code, 0)))
        rows.append(row)
    header = ["Type", "Loss"] + (["Posts"] if corpus_sizes is not None else [])
    return (
        "## Language generation results\n\n"
        + _md_table(header, rows)
        + f"\n\nE-group mean loss: {table['extrovert_mean_loss']:.6g}; "
        f"I-group mean loss: {table['introvert_mean_loss']:.6g}"
    )


def provenance_footer(info: dict) -> str:
    lines = ["", "---", ""]
    lines += [f"- {key}: `{value}`" for key, value in sorted(info.items())]
    return "\n".join(lines)


def metrics_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["metric", "value"])
    writer.writerow(["exact_accuracy", repr(report.exact_accuracy)])
    for k in (1, 2, 3, 4):
        writer.writerow([f"at_least_{k}", repr(report.at_least_k[k])])
    for ax in AXES:
        writer.writerow([f"axis_{ax.name}", repr(report.axis_accuracy[ax.name])])
    writer.writerow(["expected_matches", repr(report.expected_matches)])
    writer.writerow(["n_records", report.n_records])
    return buf.getvalue()


def grid_csv(results: Sequence[tuple[TrainHyperparams, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["learning_rate", "max_seq_len", "epochs", "exact_accuracy"])
    for hp, acc in results:
        writer.writerow([hp.learning_rate, hp.max_seq_len, hp.epochs, repr(acc)])
    return buf.getvalue()
