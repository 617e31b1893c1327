"""Core vocabulary: queries, candidate responses, confidence bands, outcomes.

All values here are immutable after construction and safe to share across
threads. Construction enforces the structural invariants; anything that
needs runtime context (thresholds, query shape) is checked by the modules
that own that context.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum

# Canonical category labels for the five standard corpus categories; any
# other label is carried through verbatim ("other" escape hatch).
LEXICON = "Lexicon"
RESEARCH_OVERVIEW = "Research Overview"
RESEARCH_PUBLICATIONS = "Research Publications"
STANDARDS_OVERVIEW = "Standards Overview"
STANDARDS_SPECIFICATIONS = "Standards Specifications"

KNOWN_CATEGORIES: tuple[str, ...] = (
    LEXICON,
    RESEARCH_OVERVIEW,
    RESEARCH_PUBLICATIONS,
    STANDARDS_OVERVIEW,
    STANDARDS_SPECIFICATIONS,
)

SHORT_CATEGORY_LABELS: dict[str, str] = {
    LEXICON: "Le",
    RESEARCH_OVERVIEW: "RO",
    RESEARCH_PUBLICATIONS: "RP",
    STANDARDS_OVERVIEW: "SO",
    STANDARDS_SPECIFICATIONS: "SS",
}

_CATEGORY_ALIASES = {c.lower(): c for c in KNOWN_CATEGORIES}


def canonical_category(label: str) -> str:
    """Map a raw category label onto the canonical set, or pass it through.

    Matching is case- and whitespace-insensitive; unknown labels are kept
    verbatim so non-standard corpora ingest without schema changes.
    """
    normalized = " ".join(label.split()).lower()
    return _CATEGORY_ALIASES.get(normalized, label.strip())


class ConfidenceLevel(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"

    @property
    def rank(self) -> int:
        """Position under the order low < medium < high."""
        return ("low", "medium", "high").index(self.value)


class Validation(str, Enum):
    VALID = "valid"
    REJECTED_FORMAT = "rejected_format"
    REJECTED_LENGTH = "rejected_length"
    REJECTED_COMPLETENESS = "rejected_completeness"
    FAILED = "failed"


class ConsensusKind(str, Enum):
    UNANIMOUS = "unanimous"
    MAJORITY = "majority"
    PLURALITY = "plurality"
    SPLIT = "split"


@dataclass(frozen=True, slots=True)
class Option:
    option_id: int
    text: str


@dataclass(frozen=True)
class Query:
    """One question: multiple-choice when it has options, free-form otherwise."""

    id: str
    text: str
    options: tuple[Option, ...] = ()
    category: str = "Other"
    ground_truth: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.options, tuple):
            object.__setattr__(self, "options", tuple(self.options))
        ids = [o.option_id for o in self.options]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(
                f"query {self.id!r}: option ids must be contiguous from 1, got {ids}"
            )
        if self.ground_truth is not None:
            if not self.options:
                raise ValueError(
                    f"query {self.id!r}: free-form queries cannot carry a ground truth"
                )
            if self.ground_truth not in self.option_ids:
                raise ValueError(
                    f"query {self.id!r}: ground truth {self.ground_truth} "
                    f"is not among option ids {sorted(self.option_ids)}"
                )

    @property
    def is_multiple_choice(self) -> bool:
        return bool(self.options)

    @property
    def option_ids(self) -> frozenset[int]:
        return frozenset(o.option_id for o in self.options)


@dataclass(frozen=True, slots=True)
class ConfidenceThresholds:
    """Score bands for high/medium/low confidence leveling."""

    high_min: float = 75.0
    medium_min: float = 40.0

    def __post_init__(self) -> None:
        if self.medium_min >= self.high_min:
            raise ValueError(
                f"invalid thresholds ({self.high_min}, {self.medium_min}): "
                "medium_min < high_min violated"
            )
        if not (0 < self.medium_min and self.high_min <= 100):
            raise ValueError(
                f"invalid thresholds ({self.high_min}, {self.medium_min}): "
                "0 < medium_min < high_min <= 100 required"
            )


def classify_confidence(
    score: float, thresholds: ConfidenceThresholds
) -> ConfidenceLevel:
    """Band a certainty score in [0, 100] into high, medium, or low.

    High iff score >= high_min; medium iff medium_min <= score < high_min;
    low otherwise. Total and deterministic over the legal domain.
    """
    if not 0 <= score <= 100:
        raise ValueError(f"confidence score {score} outside [0, 100]")
    if score >= thresholds.high_min:
        return ConfidenceLevel.HIGH
    if score >= thresholds.medium_min:
        return ConfidenceLevel.MEDIUM
    return ConfidenceLevel.LOW


@dataclass(frozen=True)
class ProponentResponse:
    """One committee member's terminal result for one query.

    ``answer`` is an option id for multiple choice and free text otherwise;
    it is None only when validation is ``FAILED``. ``attempt`` counts the
    draft that produced this result, starting at 1.
    """

    proponent_id: str
    answer: int | str | None
    reason: str
    confidence_score: float | None = None
    confidence_level: ConfidenceLevel | None = None
    attempt: int = 1
    validation: Validation = Validation.VALID
    diagnostic: str | None = None

    def __post_init__(self) -> None:
        if self.attempt < 1:
            raise ValueError(f"attempt must be >= 1, got {self.attempt}")
        if self.validation is Validation.VALID:
            if self.answer is None:
                raise ValueError("a valid response must carry an answer")
            if not self.reason.strip():
                raise ValueError("a valid response must carry a non-empty reason")

    def to_dict(self) -> dict:
        return {
            "proponent_id": self.proponent_id,
            "answer": self.answer,
            "reason": self.reason,
            "confidence_score": self.confidence_score,
            "confidence_level": (
                self.confidence_level.value if self.confidence_level else None
            ),
            "attempt": self.attempt,
            "validation": self.validation.value,
            "diagnostic": self.diagnostic,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ProponentResponse":
        level = data.get("confidence_level")
        return cls(
            proponent_id=data["proponent_id"],
            answer=data["answer"],
            reason=data["reason"],
            confidence_score=data.get("confidence_score"),
            confidence_level=ConfidenceLevel(level) if level else None,
            attempt=data.get("attempt", 1),
            validation=Validation(data.get("validation", "valid")),
            diagnostic=data.get("diagnostic"),
        )


@dataclass(frozen=True, slots=True)
class ConsensusSummary:
    """Agreement shape over the valid candidates' answers.

    ``leading_answer`` is None exactly when the maximal count is tied
    (split); ``leading_count`` is always the maximal count.
    """

    kind: ConsensusKind
    leading_answer: int | None
    leading_count: int
    total_valid: int


@dataclass(frozen=True)
class AdjudicationOutcome:
    """The committee's final word on one query."""

    query_id: str
    final_answer: int | str
    rationale: str
    consensus: ConsensusSummary
    adjudicator_confidence: ConfidenceLevel | None
    needs_human_review: bool
    contributing: tuple[ProponentResponse, ...] = ()


def make_query(
    query_id: str,
    text: str,
    option_texts: Sequence[str] = (),
    category: str = "Other",
    ground_truth: int | None = None,
) -> Query:
    """Build a query from bare option texts, numbering them from 1."""
    options = tuple(
        Option(option_id=i, text=t) for i, t in enumerate(option_texts, start=1)
    )
    return Query(
        id=query_id,
        text=text,
        options=options,
        category=canonical_category(category),
        ground_truth=ground_truth,
    )
