"""Committee-of-models question answering.

A committee of proponent models answers each query with a justification,
every response runs through a quality gate with a bounded redraft loop, and
an adjudicator model synthesizes the final answer with optional confidence
flagging. A benchmark harness scores the pipeline on multiple-choice
corpora per category.
"""

from .adjudication import (
    AdjudicationOptions,
    adjudicate,
    majority_fallback,
    outcome_record,
    outcome_record_json,
    summarize_consensus,
)
from .benchmark import (
    BenchmarkRecord,
    BenchmarkReport,
    aggregate,
    emit_report,
    load_corpus,
    relative_improvement,
    score,
)
from .clients import (
    AdversarialPolicy,
    CallContext,
    FixedPolicy,
    HttpKind,
    ModelEndpoint,
    ProbabilisticPolicy,
    RecordingTape,
    ReplayKind,
    ReplayStore,
    ScriptedKind,
    complete,
    parse_structured_response,
    structured_answer_text,
)
from .config import RunConfig, load_config, parse_config
from .domain import (
    AdjudicationOutcome,
    ConfidenceLevel,
    ConfidenceThresholds,
    ConsensusKind,
    ConsensusSummary,
    Option,
    ProponentResponse,
    Query,
    Validation,
    classify_confidence,
    make_query,
)
from .errors import (
    AdjudicationError,
    AggregateError,
    ConfigError,
    CouncilError,
    DeadlineError,
    EndpointError,
    EndpointTimeoutError,
    FieldError,
    IngestError,
    InsufficientCommitteeError,
    ParseError,
    ProtocolError,
    RenderError,
    ScoreError,
)
from .gate import QualityPolicy, run_gate, validate
from .mockserver import MockCommitteeServer, MockPolicy, MockRule
from .orchestrator import (
    CommitteeConfig,
    Execution,
    FeatureFlags,
    answer_batch,
    answer_query,
)
from .prompts import (
    DEFAULT_ADJUDICATOR_TEMPLATE,
    DEFAULT_PROPONENT_TEMPLATE,
    PromptTemplate,
    Role,
    render_adjudicator_prompt,
    render_proponent_prompt,
)

__version__ = "0.1.0"
