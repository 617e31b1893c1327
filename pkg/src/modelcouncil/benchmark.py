"""Benchmark harness: ingest a keyed-record corpus, score outcomes by exact
match against ground truth, aggregate per category, and emit reports.

Aggregation merges integer counts only; accuracies are computed once at the
end, so partition-then-merge is associative and the same records always
produce the same report. Both question-weighted (micro) and unweighted-mean
(macro) accuracy are reported because a category-weighted average is not
recoverable from category accuracies alone.
"""

from __future__ import annotations

import csv
import io
import json
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .domain import (
    AdjudicationOutcome,
    ConfidenceLevel,
    ConsensusKind,
    KNOWN_CATEGORIES,
    Query,
    SHORT_CATEGORY_LABELS,
    make_query,
)
from .errors import AggregateError, CouncilError, IngestError, ScoreError

UNSPECIFIED_LEVEL = "unspecified"

_OPTION_KEY_RE = re.compile(r"(?i)^option\s+(\d+)$")
_ANSWER_RE = re.compile(r"(?i)^\s*option\s+(\d+)\s*(?::.*)?$", re.DOTALL)


@dataclass(frozen=True)
class BenchmarkRecord:
    """One scored question; ``predicted`` is None when the pipeline errored."""

    query_id: str
    category: str
    ground_truth: int
    predicted: int | None
    correct: bool
    consensus_kind: ConsensusKind | None = None
    confidence_level: ConfidenceLevel | None = None
    needs_human_review: bool = False

    def __post_init__(self) -> None:
        if self.correct != (self.predicted == self.ground_truth):
            raise ValueError(
                f"record {self.query_id!r}: correct flag contradicts "
                f"predicted/ground_truth"
            )


@dataclass(frozen=True)
class CategoryStats:
    n: int
    n_correct: int

    @property
    def accuracy(self) -> float:
        return 100.0 * self.n_correct / self.n if self.n else 0.0


@dataclass(frozen=True)
class BenchmarkReport:
    per_category: Mapping[str, CategoryStats]
    total: CategoryStats
    micro_accuracy: float
    macro_accuracy: float
    per_confidence: Mapping[str, Mapping[str, CategoryStats]] | None = None
    improvement_vs: Mapping[str, float] | None = None


def load_corpus(path: str | Path) -> list[Query]:
    """Parse a keyed-record corpus document into queries.

    Each record holds ``question``, ``option 1..k``, ``answer`` ("option N"
    or "option N: text"), optional ``category`` and ``explanation``. The
    answer's option index becomes the ground truth. An empty document is an
    empty corpus, not an error.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(str(path), f"cannot read corpus: {exc}") from exc
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise IngestError(str(path), f"corpus is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise IngestError(str(path), "corpus root must be an object keyed by record")

    queries: list[Query] = []
    for key, record in data.items():
        queries.append(_parse_record(str(key), record))
    return queries


def _parse_record(key: str, record: object) -> Query:
    if not isinstance(record, dict):
        raise IngestError(key, "record must be an object")
    question = record.get("question")
    if not isinstance(question, str) or not question.strip():
        raise IngestError(key, "missing or empty question field")

    numbered: dict[int, str] = {}
    for field_name, value in record.items():
        match = _OPTION_KEY_RE.match(field_name)
        if match:
            numbered[int(match.group(1))] = str(value)
    option_ids = sorted(numbered)
    if option_ids != list(range(1, len(option_ids) + 1)):
        raise IngestError(key, f"option ids must be contiguous from 1, got {option_ids}")

    answer = record.get("answer")
    if not isinstance(answer, str):
        raise IngestError(key, "missing answer field")
    answer_match = _ANSWER_RE.match(answer)
    if not answer_match:
        raise IngestError(key, f"unparsable answer field {answer!r}")
    ground_truth = int(answer_match.group(1))
    if ground_truth not in numbered:
        raise IngestError(
            key, f"answer references option {ground_truth} but only "
            f"{len(numbered)} options exist"
        )

    category = record.get("category", "Other")
    try:
        return make_query(
            key,
            question,
            [numbered[i] for i in option_ids],
            category=str(category),
            ground_truth=ground_truth,
        )
    except ValueError as exc:
        raise IngestError(key, str(exc)) from exc


def score(
    outcomes: Sequence[tuple[str, AdjudicationOutcome | CouncilError]],
    corpus: Sequence[Query],
) -> list[BenchmarkRecord]:
    """Exact-match scoring; errors and missing predictions count as wrong."""
    by_id = {q.id: q for q in corpus}
    records: list[BenchmarkRecord] = []
    for query_id, result in outcomes:
        query = by_id.get(query_id)
        if query is None:
            raise ScoreError(f"outcome references unknown query {query_id!r}")
        if query.ground_truth is None:
            raise ScoreError(f"query {query_id!r} has no ground truth to score against")
        if isinstance(result, AdjudicationOutcome):
            predicted = result.final_answer if isinstance(result.final_answer, int) else None
            records.append(
                BenchmarkRecord(
                    query_id=query_id,
                    category=query.category,
                    ground_truth=query.ground_truth,
                    predicted=predicted,
                    correct=predicted == query.ground_truth,
                    consensus_kind=result.consensus.kind,
                    confidence_level=result.adjudicator_confidence,
                    needs_human_review=result.needs_human_review,
                )
            )
        else:
            records.append(
                BenchmarkRecord(
                    query_id=query_id,
                    category=query.category,
                    ground_truth=query.ground_truth,
                    predicted=None,
                    correct=False,
                )
            )
    return records


def normalized_match(predicted: str, expected: str) -> bool:
    """Case- and whitespace-insensitive equality for free-form answers."""
    return " ".join(predicted.lower().split()) == " ".join(expected.lower().split())


def relative_improvement(accuracy: float, baseline: float) -> float:
    """Relative percent gain of ``accuracy`` over ``baseline``."""
    if baseline <= 0:
        raise AggregateError(f"baseline accuracy must be positive, got {baseline}")
    return 100.0 * (accuracy - baseline) / baseline


def _tally(records: Sequence[BenchmarkRecord]) -> dict[str, CategoryStats]:
    counts: dict[str, list[int]] = {}
    for record in records:
        bucket = counts.setdefault(record.category, [0, 0])
        bucket[0] += 1
        bucket[1] += int(record.correct)
    return {cat: CategoryStats(n, k) for cat, (n, k) in counts.items()}


def aggregate(
    records: Sequence[BenchmarkRecord],
    baselines: Mapping[str, float] | None = None,
) -> BenchmarkReport:
    """Summarize scored records into per-category and overall accuracies."""
    if not records:
        raise AggregateError("cannot aggregate an empty record set")

    per_category = _tally(records)
    total = CategoryStats(len(records), sum(r.correct for r in records))
    micro = total.accuracy
    macro = sum(s.accuracy for s in per_category.values()) / len(per_category)

    per_confidence: dict[str, dict[str, CategoryStats]] | None = None
    if any(r.confidence_level is not None for r in records):
        per_confidence = {}
        for level in [l.value for l in ConfidenceLevel] + [UNSPECIFIED_LEVEL]:
            subset = [
                r
                for r in records
                if (r.confidence_level.value if r.confidence_level else UNSPECIFIED_LEVEL)
                == level
            ]
            if subset:
                per_confidence[level] = _tally(subset)

    improvement = None
    if baselines:
        improvement = {
            name: relative_improvement(micro, value)
            for name, value in baselines.items()
        }

    return BenchmarkReport(
        per_category=per_category,
        total=total,
        micro_accuracy=micro,
        macro_accuracy=macro,
        per_confidence=per_confidence,
        improvement_vs=improvement,
    )


def category_order(categories: Sequence[str]) -> list[str]:
    """Canonical column order: the five standard categories, then the rest."""
    known = [c for c in KNOWN_CATEGORIES if c in categories]
    other = sorted(c for c in categories if c not in KNOWN_CATEGORIES)
    return known + other


def _short_label(category: str) -> str:
    return SHORT_CATEGORY_LABELS.get(category, category)


def report_dict(report: BenchmarkReport) -> dict:
    out: dict = {
        "per_category": {
            cat: {"n": s.n, "n_correct": s.n_correct, "accuracy": s.accuracy}
            for cat, s in report.per_category.items()
        },
        "total": {"n": report.total.n, "n_correct": report.total.n_correct},
        "micro_accuracy": report.micro_accuracy,
        "macro_accuracy": report.macro_accuracy,
        "per_confidence": None,
        "improvement_vs": dict(report.improvement_vs) if report.improvement_vs else None,
    }
    if report.per_confidence is not None:
        out["per_confidence"] = {
            level: {
                cat: {"n": s.n, "n_correct": s.n_correct, "accuracy": s.accuracy}
                for cat, s in stats.items()
            }
            for level, stats in report.per_confidence.items()
        }
    return out


def _emit_json(report: BenchmarkReport) -> str:
    return json.dumps(report_dict(report), indent=2, sort_keys=True) + "\n"


def _emit_csv(report: BenchmarkReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["confidence_level", "category", "n", "n_correct", "accuracy"])
    order = category_order(list(report.per_category))
    for cat in order:
        s = report.per_category[cat]
        writer.writerow(["all", cat, s.n, s.n_correct, f"{s.accuracy:.2f}"])
    writer.writerow(
        ["all", "all", report.total.n, report.total.n_correct,
         f"{report.micro_accuracy:.2f}"]
    )
    if report.per_confidence:
        for level in [l.value for l in ConfidenceLevel] + [UNSPECIFIED_LEVEL]:
            stats = report.per_confidence.get(level)
            if not stats:
                continue
            for cat in category_order(list(stats)):
                s = stats[cat]
                writer.writerow([level, cat, s.n, s.n_correct, f"{s.accuracy:.2f}"])
    return buffer.getvalue()


def _accuracy_row(stats: Mapping[str, CategoryStats], order: Sequence[str]) -> str:
    cells = [f"{stats[cat].accuracy:.2f}" for cat in order if cat in stats]
    n = sum(stats[cat].n for cat in order if cat in stats)
    k = sum(stats[cat].n_correct for cat in order if cat in stats)
    cells.append(f"{100.0 * k / n:.2f}" if n else "-")
    return " ".join(cells)


def _emit_table(report: BenchmarkReport) -> str:
    order = category_order(list(report.per_category))
    lines = [
        " ".join([_short_label(c) for c in order] + ["Avg."]),
        _accuracy_row(report.per_category, order),
        f"macro: {report.macro_accuracy:.2f}",
    ]
    if report.per_confidence:
        lines.append("")
        lines.append(" ".join(["confidence"] + [_short_label(c) for c in order] + ["Avg."]))
        for level in [l.value for l in ConfidenceLevel] + [UNSPECIFIED_LEVEL]:
            stats = report.per_confidence.get(level)
            if not stats:
                continue
            row = [f"{stats[cat].accuracy:.2f}" if cat in stats else "-" for cat in order]
            n = sum(s.n for s in stats.values())
            k = sum(s.n_correct for s in stats.values())
            row.append(f"{100.0 * k / n:.2f}" if n else "-")
            lines.append(" ".join([level] + row))
    if report.improvement_vs:
        lines.append("")
        for name in sorted(report.improvement_vs):
            lines.append(f"improvement vs {name}: {report.improvement_vs[name]:+.2f}%")
    return "\n".join(lines) + "\n"


_EMITTERS = {"json": _emit_json, "csv": _emit_csv, "table": _emit_table}

REPORT_FORMATS = tuple(_EMITTERS)


def emit_report(report: BenchmarkReport, fmt: str) -> str:
    """Render a report as json, csv, or a plain text table.

    The text table lists categories in the canonical short-label order
    (Le RO RP SO SS, then any others) with the question-weighted average in
    the final column. Output bytes are a pure function of the report.
    """
    try:
        emitter = _EMITTERS[fmt]
    except KeyError:
        raise ValueError(
            f"unknown report format {fmt!r}; expected one of {sorted(_EMITTERS)}"
        ) from None
    return emitter(report)
