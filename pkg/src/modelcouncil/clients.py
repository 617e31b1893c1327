"""Uniform access to chat-completion backends.

Three endpoint kinds share one ``complete`` entry point:

* ``HttpKind`` talks the OpenAI-compatible chat-completions wire protocol
  (POST {base_url}/chat/completions) with bounded retries and exponential
  backoff on transient failures.
* ``ScriptedKind`` answers in-process from a deterministic policy; no
  network activity ever.
* ``ReplayKind`` serves previously recorded completions keyed by
  (endpoint name, query id, attempt).

Scripted draws are derived from (seed, query id) only, so two endpoints
sharing a seed answer identically (useful for forcing unanimity) and
concurrency cannot perturb determinism.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import requests

from .domain import ConfidenceLevel, Query
from .errors import (
    EndpointError,
    EndpointTimeoutError,
    FieldError,
    ParseError,
    ProtocolError,
)

# --------------------------------------------------------------------------
# Endpoint kinds and scripted policies
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HttpKind:
    base_url: str
    model_id: str
    auth_token_env: str | None = None
    timeout_ms: float = 30_000.0
    max_retries: int = 2
    temperature: float = 0.0
    retry_backoff_ms: float = 100.0

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be > 0, got {self.timeout_ms}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")


@dataclass(frozen=True)
class FixedPolicy:
    """Raw completion texts per query id, one entry per attempt.

    The last text repeats once attempts outrun the script; a "default"
    key serves queries with no dedicated script.
    """

    scripts: Mapping[str, tuple[str, ...]]


@dataclass(frozen=True)
class ProbabilisticPolicy:
    """Answer correctly with a per-category probability, seeded.

    ``p`` is either one probability for every category or a mapping from
    category label to probability with an optional "default" entry.
    Requires queries that carry a ground truth.
    """

    p: float | Mapping[str, float]
    seed: int = 0

    def probability_for(self, category: str) -> float:
        if isinstance(self.p, Mapping):
            if category in self.p:
                value = self.p[category]
            elif "default" in self.p:
                value = self.p["default"]
            else:
                raise ValueError(f"no probability configured for category {category!r}")
        else:
            value = self.p
        if not 0 <= value <= 1:
            raise ValueError(f"probability {value} outside [0, 1]")
        return float(value)


@dataclass(frozen=True)
class AdversarialPolicy:
    """Always pick the lowest-numbered wrong option."""


ScriptedPolicy = FixedPolicy | ProbabilisticPolicy | AdversarialPolicy


@dataclass(frozen=True)
class ScriptedKind:
    policy: ScriptedPolicy
    latency_ms: float = 0.0


@dataclass(frozen=True)
class ReplayKind:
    fixture_path: str


@dataclass(frozen=True)
class ModelEndpoint:
    name: str
    kind: HttpKind | ScriptedKind | ReplayKind


@dataclass(frozen=True)
class CallContext:
    """Identifies the call for scripted determinism and replay lookup."""

    query: Query
    attempt: int = 1


# --------------------------------------------------------------------------
# Structured response helpers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParsedCandidate:
    answer: int | str
    reason: str
    confidence_score: float | None = None
    confidence_level: ConfidenceLevel | None = None


def structured_answer_text(
    answer: int | str, reason: str, confidence: float | str | None = None
) -> str:
    """Build a compliant raw completion for scripted backends and tests."""
    payload: dict = {"answer": answer, "reason": reason}
    if confidence is not None:
        payload["confidence"] = confidence
    return json.dumps(payload, ensure_ascii=False)


def _coerce_answer(value: object, query: Query) -> int | str:
    if not query.is_multiple_choice:
        if value is None:
            raise FieldError("answer field is null")
        return value if isinstance(value, str) else str(value)
    if isinstance(value, bool):
        raise FieldError(f"answer {value!r} is not an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        if text.isdigit():
            return int(text)
        match = re.match(r"(?i)^option\s*(\d+)\b", text)
        if match:
            return int(match.group(1))
    raise FieldError(f"answer {value!r} is not an integer")


def _coerce_confidence(
    value: object,
) -> tuple[float | None, ConfidenceLevel | None]:
    if value is None:
        return None, None
    if isinstance(value, bool):
        raise FieldError(f"confidence {value!r} is not a number")
    if isinstance(value, (int, float)):
        score = float(value)
    elif isinstance(value, str):
        text = value.strip().lower()
        try:
            return None, ConfidenceLevel(text)
        except ValueError:
            pass
        try:
            score = float(text)
        except ValueError:
            raise FieldError(f"confidence {value!r} is not a number or level") from None
    else:
        raise FieldError(f"confidence {value!r} is not a number or level")
    if not 0 <= score <= 100:
        raise FieldError(f"confidence {score} outside [0, 100]")
    return score, None


def parse_structured_response(raw: str, query: Query) -> ParsedCandidate:
    """Extract the first usable structured object from a raw completion.

    Tolerates surrounding prose and code fences: the text is scanned for
    the first JSON object carrying an "answer" key. No object at all is a
    ParseError; an object without a usable answer is a FieldError.
    """
    decoder = json.JSONDecoder()
    found_object = False
    candidate: dict | None = None
    index = raw.find("{")
    while index != -1:
        try:
            obj, _ = decoder.raw_decode(raw, index)
        except ValueError:
            index = raw.find("{", index + 1)
            continue
        if isinstance(obj, dict):
            found_object = True
            if "answer" in obj:
                candidate = obj
                break
        index = raw.find("{", index + 1)

    if candidate is None:
        if found_object:
            raise FieldError("answer field missing from structured response")
        raise ParseError("no structured object found in response")

    answer = _coerce_answer(candidate["answer"], query)
    reason_raw = candidate.get("reason")
    reason = "" if reason_raw is None else str(reason_raw)
    score, level = _coerce_confidence(candidate.get("confidence"))
    return ParsedCandidate(
        answer=answer, reason=reason, confidence_score=score, confidence_level=level
    )


# --------------------------------------------------------------------------
# Record / replay fixtures
# --------------------------------------------------------------------------


class RecordingTape:
    """Thread-safe capture of every raw completion during a run."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._records: list[dict] = []

    def add(self, endpoint: str, query_id: str, attempt: int, raw_text: str) -> None:
        with self._lock:
            self._records.append(
                {
                    "endpoint": endpoint,
                    "query_id": query_id,
                    "attempt": attempt,
                    "raw_text": raw_text,
                }
            )

    def wrap(self, completer):
        """Return a completer that records every completion it sees."""

        def recording_completer(endpoint, messages, context=None):
            raw = completer(endpoint, messages, context)
            if context is None:
                raise EndpointError(endpoint.name, "recording requires a call context")
            self.add(endpoint.name, context.query.id, context.attempt, raw)
            return raw

        return recording_completer

    def write(self, path: str | Path, meta: Mapping) -> None:
        """Write the fixture: a meta header line, then one record per line."""
        with self._lock:
            records = list(self._records)
        lines = [json.dumps({"record": "meta", **meta}, sort_keys=True)]
        lines.extend(
            json.dumps({"record": "completion", **r}, sort_keys=True) for r in records
        )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class ReplayStore:
    """Recorded completions loaded from a fixture file."""

    def __init__(self, meta: dict, records: dict[tuple[str, str, int], str]):
        self.meta = meta
        self._records = records

    @classmethod
    def load(cls, path: str | Path) -> "ReplayStore":
        meta: dict = {}
        records: dict[tuple[str, str, int], str] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            if entry.get("record") == "meta":
                meta = {k: v for k, v in entry.items() if k != "record"}
                continue
            key = (entry["endpoint"], entry["query_id"], int(entry["attempt"]))
            records[key] = entry["raw_text"]
        return cls(meta, records)

    def lookup(self, endpoint: str, query_id: str, attempt: int) -> str | None:
        return self._records.get((endpoint, query_id, attempt))


_replay_cache: dict[str, ReplayStore] = {}
_replay_cache_lock = threading.Lock()


def _replay_store(path: str) -> ReplayStore:
    resolved = str(Path(path).resolve())
    with _replay_cache_lock:
        store = _replay_cache.get(resolved)
        if store is None:
            store = ReplayStore.load(resolved)
            _replay_cache[resolved] = store
        return store


def clear_replay_cache() -> None:
    with _replay_cache_lock:
        _replay_cache.clear()


# --------------------------------------------------------------------------
# Completion dispatch
# --------------------------------------------------------------------------


def complete(
    endpoint: ModelEndpoint,
    messages: Sequence[Mapping[str, str]],
    context: CallContext | None = None,
) -> str:
    """Return the backend's full text response for a message list.

    Safe to call concurrently across endpoints and queries. Scripted and
    replay kinds never touch the network; they require a ``context`` so
    their output is a pure function of (endpoint, query, attempt).
    """
    if not messages:
        raise ValueError("messages must be non-empty")
    kind = endpoint.kind
    if isinstance(kind, HttpKind):
        return _http_complete(endpoint, kind, messages)
    if isinstance(kind, ScriptedKind):
        if context is None:
            raise EndpointError(endpoint.name, "scripted endpoints need a call context")
        if kind.latency_ms > 0:
            time.sleep(kind.latency_ms / 1000.0)
        return _scripted_complete(endpoint, kind.policy, context)
    if isinstance(kind, ReplayKind):
        if context is None:
            raise EndpointError(endpoint.name, "replay endpoints need a call context")
        raw = _replay_store(kind.fixture_path).lookup(
            endpoint.name, context.query.id, context.attempt
        )
        if raw is None:
            raise EndpointError(
                endpoint.name,
                f"no recorded completion for query {context.query.id!r} "
                f"attempt {context.attempt}",
            )
        return raw
    raise EndpointError(endpoint.name, f"unknown endpoint kind {type(kind).__name__}")


def _stable_rng(seed: int, query_id: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{query_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _scripted_reason(endpoint: ModelEndpoint, query: Query, correct: bool) -> str:
    stance = "supports" if correct else "contradicts"
    return (
        f"Deterministic scripted rationale from {endpoint.name} "
        f"for query {query.id}; this draft {stance} the reference answer."
    )


def _scripted_complete(
    endpoint: ModelEndpoint, policy: ScriptedPolicy, context: CallContext
) -> str:
    query = context.query
    if isinstance(policy, FixedPolicy):
        script = policy.scripts.get(query.id) or policy.scripts.get("default")
        if not script:
            raise EndpointError(endpoint.name, f"no script for query {query.id!r}")
        return script[min(context.attempt, len(script)) - 1]

    if query.ground_truth is None:
        raise EndpointError(
            endpoint.name,
            f"{type(policy).__name__} needs a ground truth on query {query.id!r}",
        )
    wrong_ids = sorted(query.option_ids - {query.ground_truth})

    if isinstance(policy, AdversarialPolicy):
        if not wrong_ids:
            raise EndpointError(
                endpoint.name, f"query {query.id!r} has no wrong option to pick"
            )
        return structured_answer_text(
            wrong_ids[0], _scripted_reason(endpoint, query, correct=False)
        )

    rng = _stable_rng(policy.seed, query.id)
    try:
        p = policy.probability_for(query.category)
    except ValueError as exc:
        raise EndpointError(endpoint.name, str(exc)) from exc
    correct = rng.random() < p
    if correct or not wrong_ids:
        answer = query.ground_truth
    else:
        answer = wrong_ids[rng.randrange(len(wrong_ids))]
    return structured_answer_text(
        answer, _scripted_reason(endpoint, query, correct=answer == query.ground_truth)
    )


_RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


def _http_complete(
    endpoint: ModelEndpoint, kind: HttpKind, messages: Sequence[Mapping[str, str]]
) -> str:
    url = kind.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    if kind.auth_token_env:
        token = os.environ.get(kind.auth_token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
    body = {
        "model": kind.model_id,
        "messages": [dict(m) for m in messages],
        "temperature": kind.temperature,
    }

    last_error: Exception | None = None
    timed_out = False
    for attempt in range(kind.max_retries + 1):
        if attempt > 0:
            time.sleep(kind.retry_backoff_ms / 1000.0 * (2 ** (attempt - 1)))
        try:
            response = requests.post(
                url, json=body, headers=headers, timeout=kind.timeout_ms / 1000.0
            )
        except requests.Timeout as exc:
            last_error, timed_out = exc, True
            continue
        except requests.ConnectionError as exc:
            last_error = exc
            continue
        if response.status_code in _RETRYABLE_STATUS:
            last_error = EndpointError(
                endpoint.name,
                f"status {response.status_code} after {attempt + 1} attempt(s)",
                status=response.status_code,
            )
            continue
        if not 200 <= response.status_code < 300:
            raise EndpointError(
                endpoint.name,
                f"status {response.status_code}",
                status=response.status_code,
            )
        return _extract_content(endpoint, response)

    if timed_out:
        raise EndpointTimeoutError(
            endpoint.name, f"timed out after {kind.max_retries + 1} attempt(s)"
        )
    if isinstance(last_error, EndpointError):
        raise last_error
    raise EndpointError(endpoint.name, f"transport failure: {last_error}")


def _extract_content(endpoint: ModelEndpoint, response: requests.Response) -> str:
    try:
        payload = response.json()
    except ValueError as exc:
        raise ProtocolError(endpoint.name, f"response body is not JSON: {exc}") from exc
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(
            endpoint.name, "response lacks choices[0].message.content"
        ) from exc
    if not isinstance(content, str):
        raise ProtocolError(endpoint.name, "message content is not a string")
    return content
