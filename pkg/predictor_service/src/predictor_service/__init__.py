"""Boundary predictor microservice.

Serves POST /v1/label (text plus target, character-offset verdicts back)
and GET /healthz. Two classifier modes: a fixed lexicon matcher and a
trainable per-word model fitted on labeled-segment corpora.
"""

from .config import ServiceConfig
from .errors import ServiceConfigError, ServiceError, TrainingError
from .labeling import LexiconClassifier, keep_prefix, label_text, normalize_word
from .model import TrainingReport, UnigramClassifier, train
from .server import PredictorServer, build_classifier

__all__ = [
    "LexiconClassifier",
    "PredictorServer",
    "ServiceConfig",
    "ServiceConfigError",
    "ServiceError",
    "TrainingError",
    "TrainingReport",
    "UnigramClassifier",
    "build_classifier",
    "keep_prefix",
    "label_text",
    "normalize_word",
    "train",
]
