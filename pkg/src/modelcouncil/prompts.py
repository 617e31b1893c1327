"""Prompt templates for proponents and the adjudicator.

Templates use named-brace placeholders ({question}, {format_requirement},
{candidates_block}, {confidence_requirement}). Rendering is a pure function
of its inputs; the same inputs always produce byte-identical messages.
Defaults can be overridden from a YAML/JSON document keyed by role.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import yaml

from .domain import ProponentResponse, Query, Validation
from .errors import ConfigError, RenderError

_PLACEHOLDER_RE = re.compile(
    r"\{(question|format_requirement|candidates_block|confidence_requirement)\}"
)


class Role(str, Enum):
    PROPONENT = "proponent"
    ADJUDICATOR = "adjudicator"


@dataclass(frozen=True)
class PromptTemplate:
    """System text plus a user template with named placeholders.

    ``requires_options`` marks templates whose format requirement only makes
    sense for multiple-choice queries (the defaults ask for an option number).
    """

    role: Role
    system_text: str
    user_template: str
    format_requirement: str
    requires_options: bool = True

    def __post_init__(self) -> None:
        required = ["{question}", "{format_requirement}"]
        if self.role is Role.ADJUDICATOR:
            required.append("{candidates_block}")
        for token in required:
            if token not in self.user_template:
                raise ValueError(
                    f"{self.role.value} user_template is missing the {token} placeholder"
                )


PROPONENT_CONFIDENCE_CLAUSE = (
    ', "confidence": <your certainty in the answer, a number from 0 to 100>'
)
ADJUDICATOR_CONFIDENCE_CLAUSE = (
    ', "confidence": <your certainty, a number from 0 to 100 '
    'or one of "high", "medium", "low">'
)

DEFAULT_PROPONENT_TEMPLATE = PromptTemplate(
    role=Role.PROPONENT,
    system_text=(
        "You are an expert in an telecommunication technical committee. "
        "Your role is to give suggestion to the adjudicator who make final decisions."
    ),
    user_template=(
        "Please provide the answers to the following telecommunications related "
        "questions. The questions will be in a JSON format, "
        "the answers must also be in a JSON format as follows:\n"
        "{format_requirement}\n"
        "Question: {question}"
    ),
    format_requirement=(
        '{"answer": <the number of the selected option, an integer>, '
        '"reason": "<a concise justification for the selection>"'
        "{confidence_requirement}}"
    ),
)

DEFAULT_ADJUDICATOR_TEMPLATE = PromptTemplate(
    role=Role.ADJUDICATOR,
    system_text=(
        "You are an expert in telecommunication field, good at analyzing and "
        "giving answers to complicated questions."
    ),
    user_template=(
        "Based on the information given below, answers the question in the "
        "telecommunication field.\n"
        "Question: {question}\n"
        "Answer by each model and reason:\n"
        "{candidates_block}\n"
        "Analyse the information given, and give your answer.\n"
        "Respond in JSON with the following structure:\n"
        "{format_requirement}"
    ),
    format_requirement=(
        '{"answer": <the number of the selected option, an integer>, '
        '"reason": "<your analysis of the candidate answers>"'
        "{confidence_requirement}}"
    ),
)


def default_template(role: Role) -> PromptTemplate:
    if role is Role.PROPONENT:
        return DEFAULT_PROPONENT_TEMPLATE
    return DEFAULT_ADJUDICATOR_TEMPLATE


def _substitute(text: str, values: dict[str, str]) -> str:
    out = text
    for name, value in values.items():
        out = out.replace("{" + name + "}", value)
    leftover = _PLACEHOLDER_RE.search(out)
    if leftover:
        raise RenderError(f"unsubstituted placeholder {leftover.group(0)}")
    return out


def question_block(query: Query) -> str:
    """Render the question and its options, in order, as a JSON object."""
    payload: dict[str, str] = {"question": query.text}
    for option in query.options:
        payload[f"option {option.option_id}"] = option.text
    return json.dumps(payload, ensure_ascii=False)


def candidates_block(
    candidates: Sequence[ProponentResponse], *, confidence_enabled: bool = False
) -> str:
    """One entry per candidate, in submission order: name, answer, reason."""
    lines: list[str] = []
    for candidate in candidates:
        lines.append(f"{candidate.proponent_id}: {candidate.answer}")
        lines.append(f"reason: {candidate.reason}")
        if confidence_enabled and candidate.confidence_level is not None:
            lines.append(f"confidence: {candidate.confidence_level.value}")
    return "\n".join(lines)


def _format_requirement(template: PromptTemplate, confidence_enabled: bool) -> str:
    clause = ""
    if confidence_enabled:
        clause = (
            PROPONENT_CONFIDENCE_CLAUSE
            if template.role is Role.PROPONENT
            else ADJUDICATOR_CONFIDENCE_CLAUSE
        )
    return _substitute(template.format_requirement, {"confidence_requirement": clause})


def _check_query(template: PromptTemplate, query: Query) -> None:
    if not query.text.strip():
        raise RenderError(f"query {query.id!r} has an empty question text")
    if template.requires_options and not query.is_multiple_choice:
        raise RenderError(
            f"query {query.id!r} is free-form but the {template.role.value} "
            "template requires options"
        )


def render_proponent_prompt(
    template: PromptTemplate, query: Query, *, confidence_enabled: bool = False
) -> list[dict[str, str]]:
    """Render the system+user message pair sent to one proponent."""
    if template.role is not Role.PROPONENT:
        raise RenderError(f"expected a proponent template, got {template.role.value}")
    _check_query(template, query)
    user = _substitute(
        template.user_template,
        {
            "question": question_block(query),
            "format_requirement": _format_requirement(template, confidence_enabled),
        },
    )
    return [
        {"role": "system", "content": template.system_text},
        {"role": "user", "content": user},
    ]


def render_adjudicator_prompt(
    template: PromptTemplate,
    query: Query,
    candidates: Sequence[ProponentResponse],
    *,
    confidence_enabled: bool = False,
) -> list[dict[str, str]]:
    """Render the adjudicator messages over the valid candidate responses."""
    if template.role is not Role.ADJUDICATOR:
        raise RenderError(f"expected an adjudicator template, got {template.role.value}")
    if not candidates:
        raise RenderError("adjudicator prompt needs at least one candidate")
    for candidate in candidates:
        if candidate.validation is not Validation.VALID:
            raise RenderError(
                f"candidate from {candidate.proponent_id!r} is not valid "
                f"({candidate.validation.value})"
            )
    _check_query(template, query)
    user = _substitute(
        template.user_template,
        {
            "question": question_block(query),
            "candidates_block": candidates_block(
                candidates, confidence_enabled=confidence_enabled
            ),
            "format_requirement": _format_requirement(template, confidence_enabled),
        },
    )
    return [
        {"role": "system", "content": template.system_text},
        {"role": "user", "content": user},
    ]


def load_template_overrides(path: str | Path) -> dict[Role, PromptTemplate]:
    """Read per-role template overrides from a YAML/JSON document.

    Each role entry may set any of system_text, user_template,
    format_requirement, requires_options; unset fields keep their defaults.
    """
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"template override file {path} must be a mapping by role")
    return parse_template_overrides(raw, source=str(path))


def parse_template_overrides(
    raw: dict, *, source: str = "<config>"
) -> dict[Role, PromptTemplate]:
    overrides: dict[Role, PromptTemplate] = {}
    for key, entry in raw.items():
        try:
            role = Role(key)
        except ValueError:
            raise ConfigError(f"{source}: unknown template role {key!r}") from None
        if not isinstance(entry, dict):
            raise ConfigError(f"{source}: template entry {key!r} must be a mapping")
        base = default_template(role)
        try:
            overrides[role] = PromptTemplate(
                role=role,
                system_text=entry.get("system_text", base.system_text),
                user_template=entry.get("user_template", base.user_template),
                format_requirement=entry.get(
                    "format_requirement", base.format_requirement
                ),
                requires_options=entry.get("requires_options", base.requires_options),
            )
        except ValueError as exc:
            raise ConfigError(f"{source}: {exc}") from exc
    return overrides
