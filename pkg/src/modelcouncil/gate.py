"""Quality gate: validate every candidate response, redraft on rejection.

The gate owns all retries for a proponent. A response leaves the gate only
as ``VALID`` or ``FAILED``; intermediate rejections surface solely in the
attempt counter and the per-attempt log line
``{query_id, endpoint, attempt, verdict, diagnostic}``.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

from . import clients
from .clients import CallContext, ModelEndpoint, ParsedCandidate
from .domain import (
    ConfidenceThresholds,
    ProponentResponse,
    Query,
    Validation,
    classify_confidence,
)
from .errors import EndpointError, FieldError, ParseError
from .prompts import PromptTemplate, render_proponent_prompt

log = logging.getLogger(__name__)

Completer = Callable[[ModelEndpoint, Sequence[Mapping[str, str]], CallContext], str]


@dataclass(frozen=True)
class QualityPolicy:
    """Bounds for the automatic format/length/completeness check."""

    max_redrafts: int = 2
    min_reason_chars: int = 10
    max_reason_chars: int = 2000
    require_confidence: bool = False

    def __post_init__(self) -> None:
        if self.max_redrafts < 0:
            raise ValueError(f"max_redrafts must be >= 0, got {self.max_redrafts}")
        if not self.min_reason_chars < self.max_reason_chars:
            raise ValueError(
                f"min_reason_chars ({self.min_reason_chars}) must be below "
                f"max_reason_chars ({self.max_reason_chars})"
            )


@dataclass(frozen=True)
class ParseFailure:
    """Marker for a completion that yielded no usable structured payload."""

    message: str


@dataclass(frozen=True)
class Verdict:
    validation: Validation
    diagnostic: str = ""


def validate(
    payload: ParsedCandidate | ParseFailure, query: Query, policy: QualityPolicy
) -> Verdict:
    """Check one payload against the policy; first failing check wins.

    Order: format (parsable, legal answer), then length, then completeness.
    Emptiness is a completeness concern, so the length check only applies
    to non-blank reasons. Total function: failures are values, not raises.
    """
    if isinstance(payload, ParseFailure):
        return Verdict(
            Validation.REJECTED_FORMAT, f"unparsable response: {payload.message}"
        )
    if query.is_multiple_choice:
        if payload.answer not in query.option_ids:
            return Verdict(
                Validation.REJECTED_FORMAT,
                f"answer {payload.answer} is not a legal option id "
                f"(expected 1..{len(query.options)})",
            )
    elif not str(payload.answer).strip():
        return Verdict(Validation.REJECTED_FORMAT, "answer is empty")

    reason = payload.reason
    if reason.strip():
        if len(reason) < policy.min_reason_chars:
            return Verdict(
                Validation.REJECTED_LENGTH,
                f"reason too short: {len(reason)} < {policy.min_reason_chars} chars",
            )
        if len(reason) > policy.max_reason_chars:
            return Verdict(
                Validation.REJECTED_LENGTH,
                f"reason too long: {len(reason)} > {policy.max_reason_chars} chars",
            )
    else:
        return Verdict(Validation.REJECTED_COMPLETENESS, "reason is empty")

    if (
        policy.require_confidence
        and payload.confidence_score is None
        and payload.confidence_level is None
    ):
        return Verdict(
            Validation.REJECTED_COMPLETENESS, "confidence required but absent"
        )
    return Verdict(Validation.VALID)


def _redraft_messages(
    messages: list[dict[str, str]], raw: str, diagnostic: str
) -> list[dict[str, str]]:
    feedback = (
        f"Your previous response was rejected: {diagnostic}. "
        "Redraft and resubmit your answer in the required JSON format."
    )
    return messages + [
        {"role": "assistant", "content": raw},
        {"role": "user", "content": feedback},
    ]


def _log_attempt(
    query: Query, endpoint: ModelEndpoint, attempt: int, verdict: str, diagnostic: str
) -> None:
    log.info(
        "%s",
        json.dumps(
            {
                "query_id": query.id,
                "endpoint": endpoint.name,
                "attempt": attempt,
                "verdict": verdict,
                "diagnostic": diagnostic,
            },
            sort_keys=True,
        ),
    )


def gated_completion(
    endpoint: ModelEndpoint,
    query: Query,
    messages: list[dict[str, str]],
    policy: QualityPolicy,
    *,
    thresholds: ConfidenceThresholds | None = None,
    completer: Completer = clients.complete,
) -> ProponentResponse:
    """Run complete -> parse -> validate for up to max_redrafts+1 attempts.

    Transport failures end the loop immediately with a FAILED response
    carrying the transport diagnostic; rejected drafts are resubmitted with
    the machine diagnostic appended to the conversation.
    """
    diagnostic = ""
    attempt = 0
    for attempt in range(1, policy.max_redrafts + 2):
        context = CallContext(query=query, attempt=attempt)
        try:
            raw = completer(endpoint, messages, context)
        except (EndpointError, TimeoutError) as exc:
            diagnostic = f"transport failure: {exc}"
            _log_attempt(query, endpoint, attempt, Validation.FAILED.value, diagnostic)
            return ProponentResponse(
                proponent_id=endpoint.name,
                answer=None,
                reason="",
                attempt=attempt,
                validation=Validation.FAILED,
                diagnostic=diagnostic,
            )

        payload: ParsedCandidate | ParseFailure
        try:
            payload = clients.parse_structured_response(raw, query)
        except (ParseError, FieldError) as exc:
            payload = ParseFailure(str(exc))

        verdict = validate(payload, query, policy)
        _log_attempt(
            query, endpoint, attempt, verdict.validation.value, verdict.diagnostic
        )
        if verdict.validation is Validation.VALID:
            assert isinstance(payload, ParsedCandidate)
            level = payload.confidence_level
            if level is None and payload.confidence_score is not None and thresholds:
                level = classify_confidence(payload.confidence_score, thresholds)
            return ProponentResponse(
                proponent_id=endpoint.name,
                answer=payload.answer,
                reason=payload.reason,
                confidence_score=payload.confidence_score,
                confidence_level=level,
                attempt=attempt,
                validation=Validation.VALID,
            )
        diagnostic = verdict.diagnostic
        messages = _redraft_messages(messages, raw, diagnostic)

    return ProponentResponse(
        proponent_id=endpoint.name,
        answer=None,
        reason="",
        attempt=attempt,
        validation=Validation.FAILED,
        diagnostic=f"exhausted {attempt} attempt(s); last rejection: {diagnostic}",
    )


def run_gate(
    endpoint: ModelEndpoint,
    query: Query,
    template: PromptTemplate,
    policy: QualityPolicy,
    *,
    thresholds: ConfidenceThresholds | None = None,
    confidence_enabled: bool = False,
    completer: Completer = clients.complete,
) -> ProponentResponse:
    """Prompt one proponent and gate its response to a terminal state."""
    messages = render_proponent_prompt(
        template, query, confidence_enabled=confidence_enabled
    )
    return gated_completion(
        endpoint, query, messages, policy, thresholds=thresholds, completer=completer
    )
