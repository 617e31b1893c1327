from __future__ import annotations

from hypothesis import given, settings, strategies as st

from modelcouncil import (
    ConfidenceLevel,
    ConfidenceThresholds,
    EndpointError,
    FixedPolicy,
    ModelEndpoint,
    QualityPolicy,
    ScriptedKind,
    Validation,
    make_query,
    structured_answer_text,
    validate,
)
from modelcouncil.clients import ParsedCandidate
from modelcouncil.gate import ParseFailure, run_gate
from modelcouncil.prompts import DEFAULT_PROPONENT_TEMPLATE

POLICY = QualityPolicy(max_redrafts=2, min_reason_chars=10, max_reason_chars=2000)
QUERY = make_query("q1", "Pick the right option.", ["a", "b", "c", "d"], ground_truth=3)

GOOD_REASON = "a reason comfortably above the minimum length"


def _fixed(name: str, *texts: str, scripts_for: str = "q1") -> ModelEndpoint:
    return ModelEndpoint(
        name=name, kind=ScriptedKind(policy=FixedPolicy(scripts={scripts_for: texts}))
    )


# -- validate ----------------------------------------------------------------


def test_validate_accepts_compliant_payload() -> None:
    payload = ParsedCandidate(answer=3, reason="x" * 120)
    assert validate(payload, QUERY, POLICY).validation is Validation.VALID


def test_validate_rejects_out_of_range_option() -> None:
    payload = ParsedCandidate(answer=7, reason=GOOD_REASON)
    verdict = validate(payload, QUERY, POLICY)
    assert verdict.validation is Validation.REJECTED_FORMAT
    assert "7" in verdict.diagnostic


def test_validate_rejects_empty_reason_as_incomplete() -> None:
    verdict = validate(ParsedCandidate(answer=3, reason=""), QUERY, POLICY)
    assert verdict.validation is Validation.REJECTED_COMPLETENESS
    verdict = validate(ParsedCandidate(answer=3, reason="   \n"), QUERY, POLICY)
    assert verdict.validation is Validation.REJECTED_COMPLETENESS


def test_validate_rejects_short_and_long_reasons() -> None:
    short = validate(ParsedCandidate(answer=3, reason="tiny"), QUERY, POLICY)
    assert short.validation is Validation.REJECTED_LENGTH
    assert "reason too short: 4 < 10 chars" in short.diagnostic
    long = validate(ParsedCandidate(answer=3, reason="x" * 2001), QUERY, POLICY)
    assert long.validation is Validation.REJECTED_LENGTH


def test_validate_parse_failure_is_format_rejection() -> None:
    verdict = validate(ParseFailure("no structured object"), QUERY, POLICY)
    assert verdict.validation is Validation.REJECTED_FORMAT


def test_validate_format_beats_length() -> None:
    # Checks run format -> length -> completeness; first failure wins.
    verdict = validate(ParsedCandidate(answer=9, reason="tiny"), QUERY, POLICY)
    assert verdict.validation is Validation.REJECTED_FORMAT


def test_validate_requires_confidence_when_policy_says_so() -> None:
    strict = QualityPolicy(require_confidence=True)
    missing = validate(ParsedCandidate(answer=3, reason=GOOD_REASON), QUERY, strict)
    assert missing.validation is Validation.REJECTED_COMPLETENESS
    present = validate(
        ParsedCandidate(answer=3, reason=GOOD_REASON, confidence_score=50.0),
        QUERY,
        strict,
    )
    assert present.validation is Validation.VALID


def test_validate_is_deterministic() -> None:
    payload = ParsedCandidate(answer=2, reason=GOOD_REASON)
    assert validate(payload, QUERY, POLICY) == validate(payload, QUERY, POLICY)


# -- run_gate ----------------------------------------------------------------


def test_gate_accepts_valid_first_draft_with_single_call() -> None:
    calls = []

    def counting(endpoint, messages, context):
        calls.append(context.attempt)
        return structured_answer_text(3, GOOD_REASON)

    response = run_gate(
        _fixed("p1"), QUERY, DEFAULT_PROPONENT_TEMPLATE, POLICY, completer=counting
    )
    assert response.validation is Validation.VALID
    assert response.attempt == 1
    assert calls == [1]


def test_gate_redrafts_after_malformed_then_accepts() -> None:
    endpoint = _fixed(
        "p1", "no structured payload here", structured_answer_text(3, GOOD_REASON)
    )
    response = run_gate(endpoint, QUERY, DEFAULT_PROPONENT_TEMPLATE, POLICY)
    assert response.validation is Validation.VALID
    assert response.answer == 3
    assert response.attempt == 2


def test_gate_redraft_prompt_carries_the_diagnostic() -> None:
    seen = []

    def scripted(endpoint, messages, context):
        seen.append([m["content"] for m in messages])
        if context.attempt == 1:
            return structured_answer_text(3, "tiny")
        return structured_answer_text(3, GOOD_REASON)

    response = run_gate(
        _fixed("p1"), QUERY, DEFAULT_PROPONENT_TEMPLATE, POLICY, completer=scripted
    )
    assert response.attempt == 2
    redraft_request = seen[1][-1]
    assert "reason too short: 4 < 10 chars" in redraft_request


def test_gate_exhausts_attempts_to_failed() -> None:
    endpoint = _fixed("p1", "still not a structured response")
    response = run_gate(endpoint, QUERY, DEFAULT_PROPONENT_TEMPLATE, POLICY)
    assert response.validation is Validation.FAILED
    assert response.attempt == POLICY.max_redrafts + 1
    assert "exhausted 3 attempt(s)" in response.diagnostic


def test_gate_transport_error_becomes_failed_with_diagnostic() -> None:
    def broken(endpoint, messages, context):
        raise EndpointError(endpoint.name, "connection refused")

    response = run_gate(
        _fixed("p1"), QUERY, DEFAULT_PROPONENT_TEMPLATE, POLICY, completer=broken
    )
    assert response.validation is Validation.FAILED
    assert "transport failure" in response.diagnostic
    assert "connection refused" in response.diagnostic


def test_gate_logs_structured_line_per_attempt(caplog) -> None:
    import json as jsonlib
    import logging

    endpoint = _fixed(
        "p1", "not parsable", structured_answer_text(3, GOOD_REASON)
    )
    with caplog.at_level(logging.INFO, logger="modelcouncil.gate"):
        run_gate(endpoint, QUERY, DEFAULT_PROPONENT_TEMPLATE, POLICY)
    lines = [jsonlib.loads(r.getMessage()) for r in caplog.records]
    assert len(lines) == 2
    assert lines[0] == {
        "query_id": "q1",
        "endpoint": "p1",
        "attempt": 1,
        "verdict": "rejected_format",
        "diagnostic": lines[0]["diagnostic"],
    }
    assert "unparsable response" in lines[0]["diagnostic"]
    assert lines[1]["verdict"] == "valid"
    assert lines[1]["attempt"] == 2


def test_gate_classifies_confidence_with_thresholds() -> None:
    endpoint = _fixed("p1", structured_answer_text(3, GOOD_REASON, confidence=88))
    response = run_gate(
        endpoint,
        QUERY,
        DEFAULT_PROPONENT_TEMPLATE,
        POLICY,
        thresholds=ConfidenceThresholds(high_min=75, medium_min=40),
    )
    assert response.confidence_score == 88.0
    assert response.confidence_level is ConfidenceLevel.HIGH


_BEHAVIORS = st.sampled_from(
    ["valid", "malformed", "short_reason", "bad_answer", "empty_reason", "transport"]
)


@settings(max_examples=300, deadline=None)
@given(
    behaviors=st.lists(_BEHAVIORS, min_size=1, max_size=6),
    max_redrafts=st.integers(min_value=0, max_value=4),
)
def test_gate_call_count_bounds_and_terminal_states(
    behaviors: list[str], max_redrafts: int
) -> None:
    """Calls per proponent stay in [1, max_redrafts+1]; terminals are
    valid or failed only."""
    policy = QualityPolicy(max_redrafts=max_redrafts)
    calls = []

    def scripted(endpoint, messages, context):
        behavior = behaviors[min(context.attempt, len(behaviors)) - 1]
        calls.append(context.attempt)
        if behavior == "transport":
            raise EndpointError(endpoint.name, "injected transport failure")
        return {
            "valid": structured_answer_text(3, GOOD_REASON),
            "malformed": "prose with no payload",
            "short_reason": structured_answer_text(3, "tiny"),
            "bad_answer": structured_answer_text(9, GOOD_REASON),
            "empty_reason": structured_answer_text(3, ""),
        }[behavior]

    response = run_gate(
        _fixed("p1"), QUERY, DEFAULT_PROPONENT_TEMPLATE, policy, completer=scripted
    )
    assert 1 <= len(calls) <= max_redrafts + 1
    assert calls == list(range(1, len(calls) + 1))
    assert response.validation in (Validation.VALID, Validation.FAILED)
    assert response.attempt == len(calls)
