from __future__ import annotations

import pytest
import yaml

from modelcouncil import ConfigError, load_config
from modelcouncil.clients import HttpKind, ProbabilisticPolicy, ScriptedKind
from modelcouncil.config import config_diagnostics, replay_committee
from modelcouncil.prompts import DEFAULT_PROPONENT_TEMPLATE


def _write(tmp_path, doc: dict, name: str = "config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    return path


def _scripted_doc(**overrides) -> dict:
    doc = {
        "committee": {
            "proponents": [
                {"name": "sim-a", "kind": "scripted",
                 "policy": {"mode": "probabilistic", "p": 0.7, "seed": 1}},
                {"name": "sim-b", "kind": "scripted",
                 "policy": {"mode": "probabilistic", "p": 0.7, "seed": 2}},
            ],
            "adjudicator": {"name": "judge", "kind": "scripted",
                            "policy": {"mode": "probabilistic", "p": 0.9, "seed": 3}},
        },
    }
    doc.update(overrides)
    return doc


def test_load_minimal_scripted_config(tmp_path) -> None:
    run = load_config(_write(tmp_path, _scripted_doc()))
    committee = run.committee
    assert [e.name for e in committee.proponents] == ["sim-a", "sim-b"]
    assert isinstance(committee.proponents[0].kind, ScriptedKind)
    assert committee.quality.max_redrafts == 2
    assert committee.thresholds.high_min == 75
    assert committee.execution.parallel is True
    assert committee.min_valid_candidates == 2
    assert committee.features.confidence_enabled is False
    assert len(run.config_hash) == 16


def test_config_hash_is_stable_and_content_sensitive(tmp_path) -> None:
    first = load_config(_write(tmp_path, _scripted_doc(), "a.yaml"))
    second = load_config(_write(tmp_path, _scripted_doc(), "b.yaml"))
    assert first.config_hash == second.config_hash
    changed = _scripted_doc(min_valid_candidates=1)
    third = load_config(_write(tmp_path, changed, "c.yaml"))
    assert third.config_hash != first.config_hash


def test_http_endpoint_fields_parse(tmp_path) -> None:
    doc = _scripted_doc()
    doc["committee"]["proponents"][0] = {
        "name": "live",
        "kind": "http",
        "base_url": "http://127.0.0.1:8000/v1",
        "model_id": "my-model",
        "auth_token_env": "MY_TOKEN",
        "timeout_ms": 12000,
        "max_retries": 5,
        "temperature": 0.2,
    }
    run = load_config(_write(tmp_path, doc))
    kind = run.committee.proponents[0].kind
    assert isinstance(kind, HttpKind)
    assert kind.base_url == "http://127.0.0.1:8000/v1"
    assert kind.model_id == "my-model"
    assert kind.max_retries == 5
    assert kind.temperature == 0.2


def test_confidence_feature_implies_required_confidence(tmp_path) -> None:
    doc = _scripted_doc(features={"confidence_enabled": True})
    run = load_config(_write(tmp_path, doc))
    assert run.committee.features.confidence_enabled is True
    assert run.committee.quality.require_confidence is True

    doc = _scripted_doc(
        features={"confidence_enabled": True},
        quality={"require_confidence": False},
    )
    run = load_config(_write(tmp_path, doc, "explicit.yaml"))
    assert run.committee.quality.require_confidence is False


def test_seed_flag_feeds_scripted_policies_without_own_seed(tmp_path) -> None:
    doc = _scripted_doc()
    del doc["committee"]["proponents"][0]["policy"]["seed"]
    run = load_config(_write(tmp_path, doc), seed=99)
    policy = run.committee.proponents[0].kind.policy
    assert isinstance(policy, ProbabilisticPolicy)
    assert policy.seed == 99
    # Explicit seeds win over the base seed.
    assert run.committee.proponents[1].kind.policy.seed == 2


def test_inverted_thresholds_diagnostic(tmp_path) -> None:
    doc = _scripted_doc(thresholds={"high_min": 40, "medium_min": 75})
    path = _write(tmp_path, doc)
    diagnostics = config_diagnostics(path)
    assert len(diagnostics) == 1
    assert "medium_min < high_min violated" in diagnostics[0]


def test_unknown_execution_mode_rejected(tmp_path) -> None:
    doc = _scripted_doc(execution={"mode": "warp"})
    with pytest.raises(ConfigError, match="warp"):
        load_config(_write(tmp_path, doc))


def test_missing_committee_section_rejected(tmp_path) -> None:
    with pytest.raises(ConfigError, match="committee"):
        load_config(_write(tmp_path, {"quality": {}}))


def test_template_overrides_apply(tmp_path) -> None:
    doc = _scripted_doc(
        templates={"proponent": {"system_text": "Overridden system wording."}}
    )
    run = load_config(_write(tmp_path, doc))
    assert run.committee.proponent_template.system_text == "Overridden system wording."
    assert (
        run.committee.proponent_template.user_template
        == DEFAULT_PROPONENT_TEMPLATE.user_template
    )
    assert run.committee.adjudicator_template == run.committee.adjudicator_template


def test_replay_committee_swaps_every_endpoint(tmp_path) -> None:
    run = load_config(_write(tmp_path, _scripted_doc()))
    swapped = replay_committee(run.committee, tmp_path / "fixture.jsonl")
    from modelcouncil.clients import ReplayKind

    assert all(isinstance(e.kind, ReplayKind) for e in swapped.proponents)
    assert isinstance(swapped.adjudicator.kind, ReplayKind)
    assert [e.name for e in swapped.proponents] == [
        e.name for e in run.committee.proponents
    ]
