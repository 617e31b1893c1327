"""End-to-end pipeline: fan a query out to the committee, gate every
response, adjudicate, and assemble the outcome.

This is the only module that schedules tasks. Per-query proponent fan-out
runs concurrently in parallel mode under an in-flight cap; gate results are
joined before adjudication; batch-level concurrency composes with per-query
concurrency, and both caps are honored. Parallel and sequential execution
produce identical outcomes for deterministic committees.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import Future, ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeoutError
from dataclasses import dataclass, replace
from collections.abc import Sequence

from . import clients
from .adjudication import (
    AdjudicationOptions,
    adjudicate,
    majority_fallback,
    outcome_record,
)
from .clients import ModelEndpoint
from .domain import (
    AdjudicationOutcome,
    ConfidenceThresholds,
    ProponentResponse,
    Query,
    Validation,
)
from .errors import (
    AdjudicationError,
    CouncilError,
    DeadlineError,
    InsufficientCommitteeError,
)
from .gate import Completer, QualityPolicy, run_gate
from .prompts import (
    DEFAULT_ADJUDICATOR_TEMPLATE,
    DEFAULT_PROPONENT_TEMPLATE,
    PromptTemplate,
)


@dataclass(frozen=True)
class Execution:
    """Fan-out mode for the per-query proponent calls."""

    parallel: bool = True
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError(f"max_in_flight must be >= 1, got {self.max_in_flight}")


@dataclass(frozen=True)
class FeatureFlags:
    confidence_enabled: bool = False
    fast_path_unanimous: bool = False
    strict_review: bool = False
    fallback_majority: bool = False


@dataclass(frozen=True)
class CommitteeConfig:
    proponents: tuple[ModelEndpoint, ...]
    adjudicator: ModelEndpoint
    quality: QualityPolicy = QualityPolicy()
    thresholds: ConfidenceThresholds = ConfidenceThresholds()
    execution: Execution = Execution()
    min_valid_candidates: int = 2
    per_query_deadline_ms: float | None = None
    features: FeatureFlags = FeatureFlags()
    proponent_template: PromptTemplate = DEFAULT_PROPONENT_TEMPLATE
    adjudicator_template: PromptTemplate = DEFAULT_ADJUDICATOR_TEMPLATE

    def __post_init__(self) -> None:
        if not self.proponents:
            raise ValueError("committee needs at least one proponent")
        if not 1 <= self.min_valid_candidates <= len(self.proponents):
            raise ValueError(
                f"min_valid_candidates ({self.min_valid_candidates}) must be in "
                f"[1, {len(self.proponents)}]"
            )
        names = [e.name for e in self.proponents] + [self.adjudicator.name]
        if len(set(names)) != len(names):
            raise ValueError(f"endpoint names must be unique, got {names}")
        if self.per_query_deadline_ms is not None and self.per_query_deadline_ms <= 0:
            raise ValueError("per_query_deadline_ms must be positive when set")

    @property
    def adjudication_options(self) -> AdjudicationOptions:
        return AdjudicationOptions(
            fast_path_unanimous=self.features.fast_path_unanimous,
            confidence_enabled=self.features.confidence_enabled,
            strict_review=self.features.strict_review,
        )


class _Deadline:
    def __init__(self, budget_ms: float | None):
        self._expires = None if budget_ms is None else time.monotonic() + budget_ms / 1000.0

    def remaining(self) -> float | None:
        if self._expires is None:
            return None
        return self._expires - time.monotonic()

    def expired(self) -> bool:
        remaining = self.remaining()
        return remaining is not None and remaining <= 0


def _fan_out(
    query: Query, config: CommitteeConfig, deadline: _Deadline, completer: Completer
) -> list[ProponentResponse]:
    def one(endpoint: ModelEndpoint) -> ProponentResponse:
        return run_gate(
            endpoint,
            query,
            config.proponent_template,
            config.quality,
            thresholds=config.thresholds,
            confidence_enabled=config.features.confidence_enabled,
            completer=completer,
        )

    if not config.execution.parallel:
        results: list[ProponentResponse] = []
        for endpoint in config.proponents:
            if deadline.expired():
                raise DeadlineError(
                    f"query {query.id!r}: deadline elapsed after "
                    f"{len(results)}/{len(config.proponents)} proponents",
                    partial=tuple(results),
                )
            results.append(one(endpoint))
        return results

    executor = ThreadPoolExecutor(max_workers=config.execution.max_in_flight)
    try:
        futures: list[Future[ProponentResponse]] = [
            executor.submit(one, endpoint) for endpoint in config.proponents
        ]
        results = []
        for future in futures:
            try:
                results.append(future.result(timeout=deadline.remaining()))
            except FutureTimeoutError:
                done = tuple(f.result() for f in futures if f.done() and not f.exception())
                raise DeadlineError(
                    f"query {query.id!r}: deadline elapsed with "
                    f"{len(done)}/{len(config.proponents)} proponents finished",
                    partial=done,
                ) from None
        return results
    finally:
        executor.shutdown(wait=False, cancel_futures=True)


def answer_query(
    query: Query,
    config: CommitteeConfig,
    *,
    completer: Completer = clients.complete,
) -> AdjudicationOutcome:
    """Run the full committee pipeline for one query.

    Every proponent is gated to a terminal state; failed proponents are
    excluded from adjudication but recorded in the outcome's contributing
    list. Fewer valid candidates than the quorum raises
    InsufficientCommitteeError with the per-proponent terminal states.
    """
    deadline = _Deadline(config.per_query_deadline_ms)
    responses = _fan_out(query, config, deadline, completer)
    valid = [r for r in responses if r.validation is Validation.VALID]

    if len(valid) < config.min_valid_candidates:
        states = ", ".join(
            f"{r.proponent_id}={r.validation.value}" for r in responses
        )
        raise InsufficientCommitteeError(
            f"query {query.id!r}: {len(valid)} valid candidate(s), "
            f"need {config.min_valid_candidates} ({states})",
            responses=tuple(responses),
        )
    if deadline.expired():
        raise DeadlineError(
            f"query {query.id!r}: deadline elapsed before adjudication",
            partial=tuple(responses),
        )

    try:
        outcome = adjudicate(
            query,
            valid,
            config.adjudicator,
            config.adjudicator_template,
            options=config.adjudication_options,
            policy=config.quality,
            thresholds=config.thresholds,
            completer=completer,
        )
    except AdjudicationError as exc:
        if not config.features.fallback_majority:
            raise
        answer = majority_fallback(valid)
        outcome = AdjudicationOutcome(
            query_id=query.id,
            final_answer=answer,
            rationale=(
                f"Adjudication failed ({exc}); majority fallback selected "
                f"option {answer}."
            ),
            consensus=exc.consensus,
            adjudicator_confidence=None,
            needs_human_review=False,
            contributing=tuple(valid),
        )
    return replace(outcome, contributing=tuple(responses))


BatchResult = list[tuple[str, AdjudicationOutcome | CouncilError]]


def answer_batch(
    queries: Sequence[Query],
    config: CommitteeConfig,
    batch_parallelism: int = 1,
    *,
    completer: Completer = clients.complete,
) -> BatchResult:
    """Answer many queries, at most ``batch_parallelism`` at a time.

    Output order matches input order regardless of completion order, and
    per-query failures are returned as values so one bad query never aborts
    the batch.
    """
    if batch_parallelism < 1:
        raise ValueError(f"batch_parallelism must be >= 1, got {batch_parallelism}")

    def one(query: Query) -> AdjudicationOutcome | CouncilError:
        try:
            return answer_query(query, config, completer=completer)
        except CouncilError as exc:
            return exc

    if batch_parallelism == 1:
        return [(q.id, one(q)) for q in queries]

    with ThreadPoolExecutor(max_workers=batch_parallelism) as executor:
        futures = [executor.submit(one, q) for q in queries]
        return [(q.id, f.result()) for q, f in zip(queries, futures)]


def batch_records(results: BatchResult) -> list[dict]:
    """Manifest records: outcome records for successes, typed error entries."""
    records: list[dict] = []
    for query_id, result in results:
        if isinstance(result, AdjudicationOutcome):
            records.append(outcome_record(result))
        else:
            records.append(
                {
                    "query_id": query_id,
                    "error": {
                        "type": type(result).__name__,
                        "message": str(result),
                    },
                }
            )
    return records


def build_manifest(
    run_id: str,
    config_hash: str,
    started: str,
    finished: str,
    results: BatchResult,
) -> dict:
    return {
        "run_id": run_id,
        "config_hash": config_hash,
        "started": started,
        "finished": finished,
        "outcomes": batch_records(results),
    }


def manifest_json(manifest: dict) -> str:
    return json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
