"""Shared fixtures: the worked UAV-eavesdropper scenario, scripted
committees, and synthetic corpus builders."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from modelcouncil import (
    CommitteeConfig,
    Execution,
    FeatureFlags,
    FixedPolicy,
    ModelEndpoint,
    ProbabilisticPolicy,
    Query,
    ScriptedKind,
    make_query,
    structured_answer_text,
)
from modelcouncil.domain import KNOWN_CATEGORIES

UAV_QUESTION = (
    "What do multiple cooperative half-duplex (HD) eavesdroppers do in UAV "
    "(Unmanned aerial vehicle) wireless communication systems?"
)

UAV_OPTIONS = (
    "They transmit jamming noise to the legitimate receiver",
    "They intercept the confidential signals only",
    "They transmit jamming noise and intercept the confidential signals simultaneously",
    "They mimic a full-duplex eavesdropper without transmitting jamming",
)

UAV_COMMITTEE_VOTES: tuple[tuple[str, int, str], ...] = (
    (
        "Qwen-2.5-7B",
        3,
        "In a cooperative half-duplex eavesdropping scenario, the eavesdroppers "
        "not only intercept the confidential signals for potential malicious use "
        "or intelligence gathering, but they also transmit jamming noise to "
        "interfere with the legitimate communication, potentially harming the "
        "intended receiver's reception of the signal.",
    ),
    (
        "Phi-4",
        3,
        "Cooperative half-duplex eavesdroppers in UAV communication systems often "
        "perform both jamming and interception to disrupt the legitimate receiver "
        "while capturing the confidential signals.",
    ),
    (
        "Llama-3.1-8B",
        3,
        "This is the correct option as multiple cooperative half-duplex "
        "eavesdroppers are known to simultaneously transmit jamming noise and "
        "intercept confidential signals in UAV wireless communication systems.",
    ),
    (
        "Mistral-v0.3-7B",
        4,
        "Cooperative HD eavesdroppers in UAV communication systems can both "
        "transmit jamming signals to make it difficult for the legitimate "
        "receiver to receive the signal and intercept the confidential signals "
        "to gather information.",
    ),
)

UAV_ADJUDICATOR_REASON = (
    "The majority of the models consistently select option 3, indicating that "
    "multiple cooperative half-duplex eavesdroppers in UAV wireless "
    "communication systems both intercept confidential signals and transmit "
    "jamming noise simultaneously. This dual-action approach disrupts "
    "legitimate communication while allowing eavesdroppers to capture "
    "sensitive information. The consensus among these models, alongside the "
    "detailed reasoning provided, strongly suggests that option 3 is the most "
    "accurate choice."
)

UAV_QUERY_ID = "uav-hd-eavesdroppers"


def build_uav_query() -> Query:
    return make_query(
        UAV_QUERY_ID,
        UAV_QUESTION,
        UAV_OPTIONS,
        category="Research publications",
        ground_truth=3,
    )


def fixed_endpoint(name: str, query_id: str, answer: int, reason: str) -> ModelEndpoint:
    return ModelEndpoint(
        name=name,
        kind=ScriptedKind(
            policy=FixedPolicy(
                scripts={query_id: (structured_answer_text(answer, reason),)}
            )
        ),
    )


def build_uav_committee(features: FeatureFlags = FeatureFlags()) -> CommitteeConfig:
    proponents = tuple(
        fixed_endpoint(name, UAV_QUERY_ID, answer, reason)
        for name, answer, reason in UAV_COMMITTEE_VOTES
    )
    adjudicator = fixed_endpoint(
        "adjudicator", UAV_QUERY_ID, 3, UAV_ADJUDICATOR_REASON
    )
    return CommitteeConfig(
        proponents=proponents, adjudicator=adjudicator, features=features
    )


def probabilistic_committee(
    p: float | dict,
    *,
    n_proponents: int = 3,
    seed: int = 0,
    shared_seed: bool = True,
    adjudicator_p: float = 1.0,
    features: FeatureFlags = FeatureFlags(fast_path_unanimous=True),
    execution: Execution = Execution(),
    latency_ms: float = 0.0,
) -> CommitteeConfig:
    """Committee of seeded probabilistic proponents.

    With ``shared_seed`` every proponent draws identically, forcing a
    unanimous committee whose final answer is one Bernoulli(p) draw per
    query once the unanimous fast path is on.
    """
    proponents = tuple(
        ModelEndpoint(
            name=f"sim-{i}",
            kind=ScriptedKind(
                policy=ProbabilisticPolicy(
                    p=p, seed=seed if shared_seed else seed + 1000 * i
                ),
                latency_ms=latency_ms,
            ),
        )
        for i in range(n_proponents)
    )
    adjudicator = ModelEndpoint(
        name="sim-adjudicator",
        kind=ScriptedKind(
            policy=ProbabilisticPolicy(p=adjudicator_p, seed=seed + 777),
            latency_ms=latency_ms,
        ),
    )
    return CommitteeConfig(
        proponents=proponents,
        adjudicator=adjudicator,
        features=features,
        execution=execution,
    )


def write_synthetic_corpus(
    path: Path,
    n: int,
    *,
    seed: int = 0,
    n_options: int = 4,
    categories: tuple[str, ...] = KNOWN_CATEGORIES,
) -> Path:
    """Write a keyed-record corpus of n synthetic questions."""
    rng = random.Random(seed)
    data: dict[str, dict] = {}
    for i in range(n):
        truth = rng.randrange(1, n_options + 1)
        record: dict = {
            "question": f"Synthetic question {i}: which option is marked correct?",
            "category": categories[i % len(categories)],
            "answer": f"option {truth}: marked correct",
            "explanation": "Synthetic record for deterministic tests.",
        }
        for option_id in range(1, n_options + 1):
            marker = "correct" if option_id == truth else "incorrect"
            record[f"option {option_id}"] = f"Choice {option_id} ({marker})"
        data[f"question {i}"] = record
    path.write_text(json.dumps(data, indent=1), encoding="utf-8")
    return path


@pytest.fixture
def uav_query() -> Query:
    return build_uav_query()


@pytest.fixture
def uav_committee() -> CommitteeConfig:
    return build_uav_committee()
