"""Similarity scoring and results tables.

BLEU here is the macro-average over cases of sentence-level BLEU with
4-gram precisions, a brevity penalty, and add-one smoothing for orders
with no matches.  Source text is tokenized into identifiers, numbers,
and individual punctuation characters, so renaming one variable changes
exactly one token kind no matter how the surrounding code is spaced.
Scores are scaled to [0, 100].

Pass@1 tables report each mutation against two baselines: the model's
score on the full original benchmark and its score on the subset of
cases the mutation actually applies to.  Drops beyond 10 percentage
points (20 for composed mutations) get a highlight mark in the
markdown rendering; the CSV rendering keeps plain numbers for
downstream tooling.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .mutate import COMBO_KINDS

ORIGIN = "origin"

_TOKEN = re.compile(r"[A-Za-z_][A-Za-z_0-9]*|\d+\.\d+|\d+|\S")

HIGHLIGHT_SINGLE_PP = 10.0
HIGHLIGHT_COMBO_PP = 20.0


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def sentence_bleu(reference: str, candidate: str) -> float:
    """Sentence-level 4-gram BLEU of one mutant against its original."""
    ref = tokenize(reference)
    cand = tokenize(candidate)
    if not cand:
        return 100.0 if not ref else 0.0

    log_sum = 0.0
    for n in range(1, 5):
        cand_grams = _ngrams(cand, n)
        ref_grams = _ngrams(ref, n)
        total = sum(cand_grams.values())
        matched = sum(
            min(count, ref_grams[gram]) for gram, count in cand_grams.items()
        )
        if matched == 0:
            precision = 1.0 / (total + 1.0)
        else:
            precision = matched / total
        log_sum += math.log(precision)

    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(log_sum / 4.0) * 100.0


def bleu(originals: list[str], mutants: list[str]) -> float:
    """Macro-averaged similarity between aligned original/mutant corpora."""
    if len(originals) != len(mutants):
        raise ValueError(
            f"corpora must align: {len(originals)} originals, {len(mutants)} mutants"
        )
    if not originals:
        raise ValueError("empty corpus")
    scores = [sentence_bleu(o, m) for o, m in zip(originals, mutants)]
    return sum(scores) / len(scores)


@dataclass(frozen=True)
class ReportRow:
    """One (benchmark, model, mutation) results cell.

    Pass rates are fractions in [0, 1]; the renderers convert to the
    two-decimal percent form the tables use.
    """

    benchmark: str
    model: str
    mutation: str
    n_cases: int
    pass1_origin_full: float
    pass1_origin_subset: float
    pass1_mutated: float

    @property
    def delta_full_pp(self) -> float:
        return (self.pass1_mutated - self.pass1_origin_full) * 100.0

    @property
    def delta_subset_pp(self) -> float:
        return (self.pass1_mutated - self.pass1_origin_subset) * 100.0


@dataclass
class RunReport:
    rows: list[ReportRow] = field(default_factory=list)
    bleu_scores: dict[tuple[str, str], float] = field(default_factory=dict)


def is_combo(mutation: str) -> bool:
    return mutation in COMBO_KINDS


def highlight_threshold_pp(mutation: str) -> float:
    return HIGHLIGHT_COMBO_PP if is_combo(mutation) else HIGHLIGHT_SINGLE_PP


def is_highlighted(row: ReportRow) -> bool:
    """Whether the cell's drop crosses the table's attention threshold.

    Judged on the two-decimal value the table displays, so a drop of
    exactly 10.00 points stays unhighlighted regardless of float noise.
    """
    return -round(row.delta_full_pp, 2) > highlight_threshold_pp(row.mutation)


def _pct(value: float) -> str:
    return f"{value * 100.0:.2f}"


def _merged_rows(reports: list[RunReport]) -> list[ReportRow]:
    rows = [row for report in reports for row in report.rows]
    if not rows:
        raise ValueError("no report rows to render")
    return rows


def delta_table(reports: list[RunReport], format: str = "markdown") -> str:
    """Render pass@1 deltas for every (model, mutation) cell."""
    rows = _merged_rows(reports)
    if format == "csv":
        lines = [
            "benchmark,model,mutation,n_cases,origin_full,origin_subset,"
            "mutated,delta_full_pp,delta_subset_pp,highlighted"
        ]
        for row in rows:
            lines.append(
                ",".join(
                    [
                        row.benchmark,
                        row.model,
                        row.mutation,
                        str(row.n_cases),
                        _pct(row.pass1_origin_full),
                        _pct(row.pass1_origin_subset),
                        _pct(row.pass1_mutated),
                        f"{row.delta_full_pp:.2f}",
                        f"{row.delta_subset_pp:.2f}",
                        "1" if is_highlighted(row) else "0",
                    ]
                )
            )
        return "\n".join(lines) + "\n"
    if format != "markdown":
        raise ValueError(f"unknown format {format!r}")

    by_benchmark: dict[str, dict[str, dict[str, ReportRow]]] = {}
    mutations: list[str] = []
    for row in rows:
        by_benchmark.setdefault(row.benchmark, {}).setdefault(row.model, {})[
            row.mutation
        ] = row
        if row.mutation not in mutations:
            mutations.append(row.mutation)

    lines = []
    for benchmark, models in by_benchmark.items():
        lines.append(f"## {benchmark}")
        lines.append("")
        header = ["Model", "Origin", "Origin (subset)"]
        header += [f"{m} (Δpp)" for m in mutations]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for model, cells in models.items():
            any_row = next(iter(cells.values()))
            subset_note = (
                _pct(any_row.pass1_origin_subset)
                if len({r.pass1_origin_subset for r in cells.values()}) == 1
                else "varies"
            )
            parts = [model, _pct(any_row.pass1_origin_full), subset_note]
            for mutation in mutations:
                row = cells.get(mutation)
                if row is None:
                    parts.append("-")
                    continue
                cell = f"{_pct(row.pass1_mutated)} ({row.delta_full_pp:+.2f})"
                if is_highlighted(row):
                    cell = f"**{cell}**"
                parts.append(cell)
            lines.append("| " + " | ".join(parts) + " |")
        lines.append("")
    return "\n".join(lines)


def bleu_table(reports: list[RunReport], format: str = "markdown") -> str:
    """Render per-(benchmark, mutation) similarity scores."""
    merged: dict[tuple[str, str], float] = {}
    for report in reports:
        merged.update(report.bleu_scores)
    if not merged:
        raise ValueError("no similarity scores to render")
    if format == "csv":
        lines = ["benchmark,mutation,bleu"]
        for (benchmark, mutation), score in merged.items():
            lines.append(f"{benchmark},{mutation},{score:.2f}")
        return "\n".join(lines) + "\n"
    if format != "markdown":
        raise ValueError(f"unknown format {format!r}")
    lines = ["| Benchmark | Mutation | BLEU |", "|---|---|---|"]
    for (benchmark, mutation), score in merged.items():
        lines.append(f"| {benchmark} | {mutation} | {score:.2f} |")
    return "\n".join(lines) + "\n"


def distribution_export(reports: list[RunReport]) -> str:
    """Tidy per-model pass@1 CSV for external distribution plots.

    Includes one ``origin`` row per (benchmark, model) alongside the
    mutated conditions, so a 5-mutation run over 10 models yields 60
    data rows.
    """
    rows = _merged_rows(reports)
    lines = ["benchmark,mutation,model,pass1"]
    seen_origin: set[tuple[str, str]] = set()
    for row in rows:
        key = (row.benchmark, row.model)
        if key not in seen_origin:
            seen_origin.add(key)
            lines.append(
                f"{row.benchmark},{ORIGIN},{row.model},{row.pass1_origin_full:.4f}"
            )
        lines.append(
            f"{row.benchmark},{row.mutation},{row.model},{row.pass1_mutated:.4f}"
        )
    return "\n".join(lines) + "\n"
