"""Exception hierarchy shared across the pipeline.

Every failure that callers are expected to handle derives from
:class:`CouncilError`; plain ``ValueError`` is reserved for violated
construction invariants on domain values.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .domain import ConsensusSummary, ProponentResponse


class CouncilError(Exception):
    """Base class for all pipeline-level failures."""


class ConfigError(CouncilError):
    """A configuration file or value violates its invariants."""


class RenderError(CouncilError):
    """A prompt template could not be rendered for the given inputs."""


class EndpointError(CouncilError):
    """A backend call failed terminally (after any retries)."""

    def __init__(self, endpoint: str, message: str, status: int | None = None):
        super().__init__(f"endpoint {endpoint!r}: {message}")
        self.endpoint = endpoint
        self.status = status


class EndpointTimeoutError(EndpointError, TimeoutError):
    """A backend call timed out after exhausting retries."""


class ProtocolError(EndpointError):
    """A backend returned a response the wire protocol cannot interpret."""


class ParseError(CouncilError):
    """No structured object could be extracted from a raw completion."""


class FieldError(CouncilError):
    """A structured object was found but a required field is unusable."""


class AdjudicationError(CouncilError):
    """The adjudicator produced no usable answer after retries."""

    def __init__(self, message: str, consensus: "ConsensusSummary"):
        super().__init__(message)
        self.consensus = consensus


class InsufficientCommitteeError(CouncilError):
    """Fewer valid candidates than the configured quorum."""

    def __init__(self, message: str, responses: "tuple[ProponentResponse, ...]"):
        super().__init__(message)
        self.responses = responses


class DeadlineError(CouncilError):
    """The per-query deadline elapsed; carries whatever finished in time."""

    def __init__(self, message: str, partial: "tuple[ProponentResponse, ...]"):
        super().__init__(message)
        self.partial = partial


class IngestError(CouncilError):
    """A corpus record could not be turned into a query."""

    def __init__(self, record_key: str, message: str):
        super().__init__(f"record {record_key!r}: {message}")
        self.record_key = record_key


class ScoreError(CouncilError):
    """An outcome references a query that is not in the corpus."""


class AggregateError(CouncilError):
    """Aggregation was asked to summarize an empty record set."""
