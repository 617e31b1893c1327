"""Committee configuration files.

YAML (or JSON) documents describe the committee, quality policy, confidence
thresholds, execution mode, feature flags, and optional template overrides:

    committee:
      proponents:
        - {name: qwen, kind: http, base_url: "http://127.0.0.1:8000/v1",
           model_id: qwen-7b, timeout_ms: 30000, max_retries: 2}
        - {name: sim-a, kind: scripted,
           policy: {mode: probabilistic, p: 0.7, seed: 11}}
      adjudicator: {name: judge, kind: scripted,
                    policy: {mode: probabilistic, p: 0.9, seed: 99}}
    quality: {max_redrafts: 2, min_reason_chars: 10, max_reason_chars: 2000}
    thresholds: {high_min: 75, medium_min: 40}
    execution: {mode: parallel, max_in_flight: 4}
    min_valid_candidates: 2
    features: {confidence_enabled: false, fast_path_unanimous: false,
               strict_review: false, fallback_majority: false}
    templates: {proponent: {...}, adjudicator: {...}}

``config_hash`` fingerprints the parsed document so run manifests can name
the exact configuration they ran under.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .clients import (
    AdversarialPolicy,
    FixedPolicy,
    HttpKind,
    ModelEndpoint,
    ProbabilisticPolicy,
    ReplayKind,
    ScriptedKind,
)
from .domain import ConfidenceThresholds
from .errors import ConfigError
from .gate import QualityPolicy
from .orchestrator import CommitteeConfig, Execution, FeatureFlags
from .prompts import Role, parse_template_overrides


@dataclass(frozen=True)
class RunConfig:
    committee: CommitteeConfig
    config_hash: str
    seed: int | None = None


def config_fingerprint(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _parse_policy(raw: dict, *, name: str, base_seed: int | None):
    mode = raw.get("mode")
    if mode == "fixed":
        scripts = raw.get("scripts")
        if not isinstance(scripts, dict):
            raise ConfigError(f"endpoint {name!r}: fixed policy needs a scripts map")
        return FixedPolicy(
            scripts={
                str(qid): tuple(texts) if isinstance(texts, list) else (str(texts),)
                for qid, texts in scripts.items()
            }
        )
    if mode == "probabilistic":
        if "p" not in raw:
            raise ConfigError(f"endpoint {name!r}: probabilistic policy needs p")
        seed = raw.get("seed", base_seed if base_seed is not None else 0)
        return ProbabilisticPolicy(p=raw["p"], seed=int(seed))
    if mode == "adversarial":
        return AdversarialPolicy()
    raise ConfigError(f"endpoint {name!r}: unknown scripted policy mode {mode!r}")


def _parse_endpoint(raw: object, *, base_seed: int | None) -> ModelEndpoint:
    if not isinstance(raw, dict):
        raise ConfigError(f"endpoint entry must be a mapping, got {type(raw).__name__}")
    name = raw.get("name")
    if not name or not isinstance(name, str):
        raise ConfigError("endpoint entry needs a non-empty name")
    kind = raw.get("kind")
    try:
        if kind == "http":
            return ModelEndpoint(
                name=name,
                kind=HttpKind(
                    base_url=raw["base_url"],
                    model_id=raw.get("model_id", name),
                    auth_token_env=raw.get("auth_token_env"),
                    timeout_ms=float(raw.get("timeout_ms", 30_000)),
                    max_retries=int(raw.get("max_retries", 2)),
                    temperature=float(raw.get("temperature", 0.0)),
                    retry_backoff_ms=float(raw.get("retry_backoff_ms", 100)),
                ),
            )
        if kind == "scripted":
            policy_raw = raw.get("policy")
            if not isinstance(policy_raw, dict):
                raise ConfigError(f"endpoint {name!r}: scripted kind needs a policy map")
            return ModelEndpoint(
                name=name,
                kind=ScriptedKind(
                    policy=_parse_policy(policy_raw, name=name, base_seed=base_seed),
                    latency_ms=float(raw.get("latency_ms", 0)),
                ),
            )
        if kind == "replay":
            return ModelEndpoint(
                name=name, kind=ReplayKind(fixture_path=str(raw["fixture_path"]))
            )
    except KeyError as exc:
        raise ConfigError(f"endpoint {name!r}: missing field {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"endpoint {name!r}: {exc}") from exc
    raise ConfigError(f"endpoint {name!r}: unknown kind {kind!r}")


def parse_config(raw: dict, *, seed: int | None = None) -> RunConfig:
    """Build a validated RunConfig from a parsed configuration document."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a mapping")

    committee_raw = raw.get("committee")
    if not isinstance(committee_raw, dict):
        raise ConfigError("configuration needs a committee section")
    proponents_raw = committee_raw.get("proponents")
    if not isinstance(proponents_raw, list) or not proponents_raw:
        raise ConfigError("committee.proponents must be a non-empty list")
    adjudicator_raw = committee_raw.get("adjudicator")
    if adjudicator_raw is None:
        raise ConfigError("committee.adjudicator is required")

    try:
        proponents = tuple(
            _parse_endpoint(entry, base_seed=seed) for entry in proponents_raw
        )
        adjudicator = _parse_endpoint(adjudicator_raw, base_seed=seed)

        features_raw = raw.get("features", {})
        if not isinstance(features_raw, dict):
            raise ConfigError("features must be a mapping")
        features = FeatureFlags(
            confidence_enabled=bool(features_raw.get("confidence_enabled", False)),
            fast_path_unanimous=bool(features_raw.get("fast_path_unanimous", False)),
            strict_review=bool(features_raw.get("strict_review", False)),
            fallback_majority=bool(features_raw.get("fallback_majority", False)),
        )

        quality_raw = raw.get("quality", {})
        quality = QualityPolicy(
            max_redrafts=int(quality_raw.get("max_redrafts", 2)),
            min_reason_chars=int(quality_raw.get("min_reason_chars", 10)),
            max_reason_chars=int(quality_raw.get("max_reason_chars", 2000)),
            require_confidence=bool(
                quality_raw.get("require_confidence", features.confidence_enabled)
            ),
        )

        thresholds_raw = raw.get("thresholds", {})
        thresholds = ConfidenceThresholds(
            high_min=float(thresholds_raw.get("high_min", 75)),
            medium_min=float(thresholds_raw.get("medium_min", 40)),
        )

        execution_raw = raw.get("execution", {})
        mode = execution_raw.get("mode", "parallel")
        if mode not in ("parallel", "sequential"):
            raise ConfigError(f"execution.mode must be parallel or sequential, got {mode!r}")
        execution = Execution(
            parallel=mode == "parallel",
            max_in_flight=int(execution_raw.get("max_in_flight", 4)),
        )

        templates = parse_template_overrides(raw.get("templates", {}))

        deadline = raw.get("per_query_deadline_ms")
        committee = CommitteeConfig(
            proponents=proponents,
            adjudicator=adjudicator,
            quality=quality,
            thresholds=thresholds,
            execution=execution,
            min_valid_candidates=int(raw.get("min_valid_candidates", 2)),
            per_query_deadline_ms=float(deadline) if deadline is not None else None,
            features=features,
        )
        if Role.PROPONENT in templates:
            committee = replace(committee, proponent_template=templates[Role.PROPONENT])
        if Role.ADJUDICATOR in templates:
            committee = replace(
                committee, adjudicator_template=templates[Role.ADJUDICATOR]
            )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        committee=committee, config_hash=config_fingerprint(raw), seed=seed
    )


def load_config(path: str | Path, *, seed: int | None = None) -> RunConfig:
    """Read and validate a configuration file."""
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if raw is None:
        raise ConfigError(f"config {path} is empty")
    return parse_config(raw, seed=seed)


def config_diagnostics(path: str | Path) -> list[str]:
    """All invariant violations found in a config file, empty when valid."""
    try:
        load_config(path)
    except ConfigError as exc:
        return [str(exc)]
    return []


def replay_committee(committee: CommitteeConfig, fixture_path: str | Path) -> CommitteeConfig:
    """Swap every endpoint for a replay reader over the given fixture."""
    fixture = str(fixture_path)
    return replace(
        committee,
        proponents=tuple(
            ModelEndpoint(name=e.name, kind=ReplayKind(fixture_path=fixture))
            for e in committee.proponents
        ),
        adjudicator=ModelEndpoint(
            name=committee.adjudicator.name, kind=ReplayKind(fixture_path=fixture)
        ),
    )
