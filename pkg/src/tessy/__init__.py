"""Training-data synthesis by alternating teacher and student generation.

The package orchestrates two completion endpoints and a pair of boundary
predictors to build reasoning traces whose style tokens come from the
student and whose capability tokens come from the teacher, then validates,
annotates, and analyzes the resulting corpora.
"""

from .boundary import (
    BoundaryTarget,
    BoundaryVerdict,
    LabeledUnit,
    LexiconPredictor,
    RemotePredictor,
    StyleLexicon,
    build_predictor,
    label_units,
    predict_boundary,
    trim_partial_word,
    truncate_span,
)
from .core import (
    EndpointProfile,
    Origin,
    PredictorSelector,
    Role,
    SamplingParams,
    Span,
    SynthesisConfig,
    SynthesisRecord,
    TerminationReason,
    answer_text,
    fingerprint,
    reconstruct,
    think_text,
    validate_record,
)
from .errors import (
    AnnotationFormatError,
    ConfigError,
    EndpointError,
    PairingError,
    ProtocolError,
    StrategyError,
    StructuralError,
    TessyError,
    TrajectoryError,
    TransportError,
    VerbatimViolationError,
)
from .gateway import (
    CompletionRequest,
    CompletionResult,
    FinishReason,
    HttpGateway,
    MockGateway,
    MockScript,
    render_prompt,
)
from .orchestrator import (
    BatchOutcome,
    StrategySelector,
    run_batch,
    synthesize,
    synthesize_baseline,
    synthesize_tessy,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationFormatError",
    "BatchOutcome",
    "BoundaryTarget",
    "BoundaryVerdict",
    "CompletionRequest",
    "CompletionResult",
    "ConfigError",
    "EndpointError",
    "EndpointProfile",
    "FinishReason",
    "HttpGateway",
    "LabeledUnit",
    "LexiconPredictor",
    "MockGateway",
    "MockScript",
    "Origin",
    "PairingError",
    "PredictorSelector",
    "ProtocolError",
    "RemotePredictor",
    "Role",
    "SamplingParams",
    "Span",
    "StrategyError",
    "StrategySelector",
    "StructuralError",
    "StyleLexicon",
    "SynthesisConfig",
    "SynthesisRecord",
    "TerminationReason",
    "TessyError",
    "TrajectoryError",
    "TransportError",
    "VerbatimViolationError",
    "answer_text",
    "build_predictor",
    "fingerprint",
    "label_units",
    "predict_boundary",
    "reconstruct",
    "render_prompt",
    "run_batch",
    "synthesize",
    "synthesize_baseline",
    "synthesize_tessy",
    "think_text",
    "trim_partial_word",
    "truncate_span",
    "validate_record",
]
