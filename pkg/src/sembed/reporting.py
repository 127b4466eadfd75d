"""Markdown and CSV rendering for evaluation results."""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence

from .evaluation import EvalReport, PairCosine


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def markdown_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Pipe table with every column padded to its widest cell."""
    cells = [[fmt(c).replace("|", "\\|") for c in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for i, c in enumerate(row):
            widths[i] = max(widths[i], len(c))

    def line(values):
        return "| " + " | ".join(v.ljust(w) for v, w in zip(values, widths)) + " |"

    out = [line(headers), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    out += [line(row) for row in cells]
    return "\n".join(out) + "\n"


def csv_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(headers)
    for row in rows:
        writer.writerow([fmt(c) for c in row])
    return buf.getvalue()


def _report_rows(report: EvalReport) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = []
    if report.embedding_similarity is not None:
        rows.append(("embedding_similarity", report.embedding_similarity))
    if report.accuracy is not None:
        rows.append(("accuracy", report.accuracy))
    if report.chosen_k is not None:
        rows.append(("chosen_k", report.chosen_k))
    return rows


def report_markdown(report: EvalReport) -> str:
    text = markdown_table(["metric", "value"], _report_rows(report))
    if report.pairs:
        text += "\n" + pairs_markdown(report.pairs)
    return text


def report_csv(report: EvalReport) -> str:
    return csv_table(["metric", "value"], _report_rows(report))


def _pair_rows(pairs: Sequence[PairCosine]):
    return [(i, p.text1, p.text2, p.cosine) for i, p in enumerate(pairs, start=1)]


def pairs_markdown(pairs: Sequence[PairCosine]) -> str:
    return markdown_table(["#", "sentence 1", "sentence 2", "cosine"], _pair_rows(pairs))


def pairs_csv(pairs: Sequence[PairCosine]) -> str:
    return csv_table(["index", "sentence1", "sentence2", "cosine"], _pair_rows(pairs))
