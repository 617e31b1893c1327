"""Consensus analysis and final-answer adjudication.

``summarize_consensus`` classifies agreement over the valid candidates;
``adjudicate`` sends the query plus all candidate (answer, reason) pairs to
the adjudicator endpoint through the same gated parse path proponents use,
so an out-of-set or malformed adjudicator answer triggers a redraft.
"""

from __future__ import annotations

import json
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass

from . import clients
from .domain import (
    AdjudicationOutcome,
    ConfidenceLevel,
    ConfidenceThresholds,
    ConsensusKind,
    ConsensusSummary,
    ProponentResponse,
    Query,
    Validation,
)
from .errors import AdjudicationError
from .gate import Completer, QualityPolicy, gated_completion
from .prompts import PromptTemplate, render_adjudicator_prompt


@dataclass(frozen=True)
class AdjudicationOptions:
    fast_path_unanimous: bool = False
    confidence_enabled: bool = False
    strict_review: bool = False


def _checked_candidates(
    candidates: Sequence[ProponentResponse],
) -> list[ProponentResponse]:
    if not candidates:
        raise ValueError("candidates must be non-empty")
    for candidate in candidates:
        if candidate.validation is not Validation.VALID:
            raise ValueError(
                f"candidate from {candidate.proponent_id!r} is not valid"
            )
    return list(candidates)


def summarize_consensus(
    candidates: Sequence[ProponentResponse],
) -> ConsensusSummary:
    """Classify agreement over the candidates' option ids.

    Permutation-invariant and deterministic: unanimous when one answer takes
    every vote, majority when it takes more than half, plurality when a
    unique leader stays at or below half, split when the lead is tied.
    """
    checked = _checked_candidates(candidates)
    counts = Counter(c.answer for c in checked)
    total = len(checked)
    leading_count = max(counts.values())
    leaders = [answer for answer, n in counts.items() if n == leading_count]

    if len(leaders) > 1:
        return ConsensusSummary(ConsensusKind.SPLIT, None, leading_count, total)
    leader = leaders[0]
    if leading_count == total:
        kind = ConsensusKind.UNANIMOUS
    elif leading_count * 2 > total:
        kind = ConsensusKind.MAJORITY
    else:
        kind = ConsensusKind.PLURALITY
    return ConsensusSummary(kind, leader, leading_count, total)


def majority_fallback(candidates: Sequence[ProponentResponse]) -> int:
    """Leading answer, ties broken by the lowest option id."""
    checked = _checked_candidates(candidates)
    counts = Counter(c.answer for c in checked)
    return min(answer for answer, n in counts.items() if n == max(counts.values()))


def needs_review(level: ConfidenceLevel | None, *, strict_review: bool = False) -> bool:
    """Flagging rule: review on low confidence, and on medium when strict."""
    if level is ConfidenceLevel.LOW:
        return True
    return strict_review and level is ConfidenceLevel.MEDIUM


def adjudicate(
    query: Query,
    candidates: Sequence[ProponentResponse],
    adjudicator: clients.ModelEndpoint,
    template: PromptTemplate,
    *,
    options: AdjudicationOptions = AdjudicationOptions(),
    policy: QualityPolicy = QualityPolicy(),
    thresholds: ConfidenceThresholds | None = None,
    completer: Completer = clients.complete,
) -> AdjudicationOutcome:
    """Produce the final answer over the valid candidates.

    With ``fast_path_unanimous`` set and a unanimous committee the answer is
    returned without any adjudicator call; otherwise the adjudicator runs
    through the gated parse loop and its answer (with its self-reported
    confidence, when enabled) becomes the outcome. A terminally failed
    adjudicator raises AdjudicationError carrying the consensus summary so
    the caller may fall back to a majority vote.
    """
    checked = _checked_candidates(candidates)
    consensus = summarize_consensus(checked)

    if options.fast_path_unanimous and consensus.kind is ConsensusKind.UNANIMOUS:
        return AdjudicationOutcome(
            query_id=query.id,
            final_answer=checked[0].answer,  # type: ignore[arg-type]
            rationale=(
                f"All {consensus.total_valid} proponents selected "
                f"option {consensus.leading_answer}; adopted without adjudication."
            ),
            consensus=consensus,
            adjudicator_confidence=None,
            needs_human_review=False,
            contributing=tuple(checked),
        )

    messages = render_adjudicator_prompt(
        template, query, checked, confidence_enabled=options.confidence_enabled
    )
    response = gated_completion(
        adjudicator,
        query,
        messages,
        policy,
        thresholds=thresholds,
        completer=completer,
    )
    if response.validation is not Validation.VALID:
        raise AdjudicationError(
            f"adjudicator {adjudicator.name!r} failed on query {query.id!r}: "
            f"{response.diagnostic}",
            consensus=consensus,
        )

    level = response.confidence_level if options.confidence_enabled else None
    return AdjudicationOutcome(
        query_id=query.id,
        final_answer=response.answer,  # type: ignore[arg-type]
        rationale=response.reason,
        consensus=consensus,
        adjudicator_confidence=level,
        needs_human_review=needs_review(level, strict_review=options.strict_review),
        contributing=tuple(checked),
    )


def outcome_record(outcome: AdjudicationOutcome) -> dict:
    """Serialize an outcome to its wire/report record shape."""
    return {
        "query_id": outcome.query_id,
        "final_answer": outcome.final_answer,
        "consensus_kind": outcome.consensus.kind.value,
        "leading_count": outcome.consensus.leading_count,
        "total_valid": outcome.consensus.total_valid,
        "adjudicator_confidence": (
            outcome.adjudicator_confidence.value
            if outcome.adjudicator_confidence
            else None
        ),
        "needs_human_review": outcome.needs_human_review,
        "contributing": [
            {
                "proponent_id": r.proponent_id,
                "answer": r.answer,
                "confidence_level": (
                    r.confidence_level.value if r.confidence_level else None
                ),
            }
            for r in outcome.contributing
        ],
    }


def outcome_record_json(outcome: AdjudicationOutcome) -> str:
    """Canonical byte-stable JSON rendering of an outcome record."""
    return json.dumps(outcome_record(outcome), indent=2, ensure_ascii=False) + "\n"
