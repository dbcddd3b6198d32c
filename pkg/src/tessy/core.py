"""Core domain types: spans, records, endpoint profiles, and configuration.

Provenance is tracked at character granularity. A record's spans, concatenated
in index order, reconstruct the full generated text exactly; each span knows
which model produced it and whether rollback shortened it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import ConfigError, StructuralError

# Placeholder that must appear exactly once in every prompt template.
PROMPT_PLACEHOLDER = "{context}"

DEFAULT_SELF_DISTILL_TEMPLATE = (
    "{question}\n\n"
    "A reference solution is provided below. Produce your own reasoning and "
    "final answer in your own words.\n\n"
    "Reference:\n{reference}\n"
)

DEFAULT_JUDGE_TEMPLATE = (
    "Score the following candidate response to the question on a scale of 1 "
    "to 10. Respond with a single integer.\n\n"
    "Question:\n{question}\n\n"
    "Candidate:\n{candidate}\n\n"
    "Score:"
)


class Origin(str, Enum):
    """Which model produced a span."""

    STUDENT = "student"
    TEACHER = "teacher"


class Role(str, Enum):
    """Phase a span belongs to."""

    THINK = "think"
    ANSWER = "answer"


class TerminationReason(str, Enum):
    """How the think loop of a trajectory ended."""

    END_OF_THINK_MARKER = "end_of_think_marker"
    BUDGET_EXHAUSTED = "budget_exhausted"
    ENDPOINT_STOP = "endpoint_stop"


@dataclass(frozen=True)
class Span:
    """One contiguous stretch of generated text with provenance.

    ``raw_length_chars`` is the block length before rollback; ``truncated``
    holds exactly when the retained text is shorter than the raw block.
    """

    index: int
    origin: Origin
    role: Role
    text: str
    truncated: bool
    raw_length_chars: int

    def __post_init__(self):
        if self.index < 0:
            raise StructuralError(f"span index must be >= 0, got {self.index}")
        if self.raw_length_chars < 0:
            raise StructuralError("raw_length_chars must be >= 0")
        if len(self.text) > self.raw_length_chars:
            raise StructuralError(
                f"span {self.index}: text length {len(self.text)} exceeds "
                f"raw_length_chars {self.raw_length_chars}"
            )
        if self.truncated != (len(self.text) < self.raw_length_chars):
            raise StructuralError(
                f"span {self.index}: truncated flag inconsistent with lengths"
            )


def _reject_unknown_keys(data: dict, allowed: set[str], context: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown {context} keys: {', '.join(unknown)}")


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.0
    top_p: float = 1.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if not (0 < self.top_p <= 1):
            raise ConfigError(f"top_p must be in (0, 1], got {self.top_p}")

    def to_dict(self) -> dict[str, float]:
        return {"temperature": float(self.temperature), "top_p": float(self.top_p)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SamplingParams":
        _reject_unknown_keys(data, {"temperature", "top_p"}, "sampling")
        return cls(
            temperature=float(data.get("temperature", 0.0)),
            top_p=float(data.get("top_p", 1.0)),
        )


@dataclass(frozen=True)
class EndpointProfile:
    """A completion endpoint plus the template used to render its prompts."""

    base_url: str
    model_name: str
    prompt_template: str
    sampling: SamplingParams = field(default_factory=SamplingParams)
    vocab_family: str = "default"

    def __post_init__(self):
        if not self.base_url:
            raise ConfigError("endpoint profile requires a non-empty base_url")
        if not self.model_name:
            raise ConfigError("endpoint profile requires a non-empty model_name")
        count = self.prompt_template.count(PROMPT_PLACEHOLDER)
        if count != 1:
            raise ConfigError(
                f"prompt_template must contain {PROMPT_PLACEHOLDER!r} exactly "
                f"once, found {count}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "base_url": self.base_url,
            "model_name": self.model_name,
            "prompt_template": self.prompt_template,
            "sampling": self.sampling.to_dict(),
            "vocab_family": self.vocab_family,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EndpointProfile":
        _reject_unknown_keys(
            data,
            {"base_url", "model_name", "prompt_template", "sampling", "vocab_family"},
            "endpoint profile",
        )
        try:
            return cls(
                base_url=data["base_url"],
                model_name=data["model_name"],
                prompt_template=data["prompt_template"],
                sampling=SamplingParams.from_dict(data.get("sampling", {})),
                vocab_family=data.get("vocab_family", "default"),
            )
        except KeyError as exc:
            raise ConfigError(f"endpoint profile missing field {exc.args[0]!r}") from exc


@dataclass(frozen=True)
class PredictorSelector:
    """How to obtain a boundary predictor: built-in lexicon or remote service."""

    kind: str = "lexicon"
    url: str | None = None
    style_words: tuple[str, ...] | None = None  # None means the built-in seed set

    def __post_init__(self):
        if self.kind not in ("lexicon", "remote"):
            raise ConfigError(f"unknown predictor kind {self.kind!r}")
        if self.kind == "remote" and not self.url:
            raise ConfigError("remote predictor selector requires a url")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.url is not None:
            out["url"] = self.url
        if self.style_words is not None:
            out["style_words"] = list(self.style_words)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PredictorSelector":
        _reject_unknown_keys(data, {"kind", "url", "style_words"}, "predictor selector")
        words = data.get("style_words")
        return cls(
            kind=data.get("kind", "lexicon"),
            url=data.get("url"),
            style_words=tuple(words) if words is not None else None,
        )


_CONFIG_FIELDS = {
    "k_max_tokens",
    "bulk_block_tokens",
    "think_budget_chars",
    "answer_budget_chars",
    "end_of_think_marker",
    "vocab_mismatch_trim",
    "zero_progress_limit",
    "max_inflight_requests",
    "student",
    "teacher",
    "student_predictor",
    "teacher_predictor",
    "self_distill_template",
    "judge_template",
}


@dataclass(frozen=True)
class SynthesisConfig:
    """Everything a synthesis run needs besides the prompts themselves.

    ``k_max_tokens`` is the per-block budget inside the alternating loop;
    ``bulk_block_tokens`` sizes requests outside it (answer phase and
    single-origin strategies). Budgets are measured in retained characters.
    """

    student: EndpointProfile
    teacher: EndpointProfile
    k_max_tokens: int = 20
    bulk_block_tokens: int = 512
    think_budget_chars: int = 160_000
    answer_budget_chars: int = 160_000
    end_of_think_marker: str = "</think>"
    vocab_mismatch_trim: bool = True
    zero_progress_limit: int = 2
    max_inflight_requests: int = 32
    student_predictor: PredictorSelector = field(default_factory=PredictorSelector)
    teacher_predictor: PredictorSelector = field(default_factory=PredictorSelector)
    self_distill_template: str = DEFAULT_SELF_DISTILL_TEMPLATE
    judge_template: str = DEFAULT_JUDGE_TEMPLATE

    def __post_init__(self):
        for name in ("k_max_tokens", "bulk_block_tokens", "think_budget_chars",
                     "answer_budget_chars", "zero_progress_limit",
                     "max_inflight_requests"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not self.end_of_think_marker:
            raise ConfigError("end_of_think_marker must be non-empty")
        for ph in ("{question}", "{reference}"):
            if ph not in self.self_distill_template:
                raise ConfigError(f"self_distill_template missing {ph}")
        for ph in ("{question}", "{candidate}"):
            if ph not in self.judge_template:
                raise ConfigError(f"judge_template missing {ph}")

    def to_canonical_dict(self) -> dict[str, Any]:
        return {
            "k_max_tokens": self.k_max_tokens,
            "bulk_block_tokens": self.bulk_block_tokens,
            "think_budget_chars": self.think_budget_chars,
            "answer_budget_chars": self.answer_budget_chars,
            "end_of_think_marker": self.end_of_think_marker,
            "vocab_mismatch_trim": self.vocab_mismatch_trim,
            "zero_progress_limit": self.zero_progress_limit,
            "max_inflight_requests": self.max_inflight_requests,
            "student": self.student.to_dict(),
            "teacher": self.teacher.to_dict(),
            "student_predictor": self.student_predictor.to_dict(),
            "teacher_predictor": self.teacher_predictor.to_dict(),
            "self_distill_template": self.self_distill_template,
            "judge_template": self.judge_template,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SynthesisConfig":
        _reject_unknown_keys(data, _CONFIG_FIELDS, "config")
        try:
            student = EndpointProfile.from_dict(data["student"])
            teacher = EndpointProfile.from_dict(data["teacher"])
        except KeyError as exc:
            raise ConfigError(f"config missing endpoint profile {exc.args[0]!r}") from exc
        kwargs: dict[str, Any] = {"student": student, "teacher": teacher}
        for name in ("k_max_tokens", "bulk_block_tokens", "think_budget_chars",
                     "answer_budget_chars", "end_of_think_marker",
                     "vocab_mismatch_trim", "zero_progress_limit",
                     "max_inflight_requests", "self_distill_template",
                     "judge_template"):
            if name in data:
                kwargs[name] = data[name]
        if "student_predictor" in data:
            kwargs["student_predictor"] = PredictorSelector.from_dict(data["student_predictor"])
        if "teacher_predictor" in data:
            kwargs["teacher_predictor"] = PredictorSelector.from_dict(data["teacher_predictor"])
        return cls(**kwargs)


def fingerprint(config: SynthesisConfig) -> str:
    """Stable hash of a config; field order in the source never matters.

    The canonical form is JSON with sorted keys and plain number formatting,
    so two configs with equal values always share a fingerprint.
    """
    canonical = json.dumps(
        config.to_canonical_dict(), sort_keys=True, separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SynthesisRecord:
    """One synthesized trajectory: prompt, provenance-tagged spans, metadata."""

    id: str
    prompt: str
    spans: tuple[Span, ...]
    strategy: str
    config_fingerprint: str
    terminated_by: TerminationReason
    meta: dict[str, Any] = field(default_factory=dict)


def reconstruct(record: SynthesisRecord) -> str:
    """Concatenate span texts in index order; the full generated text."""
    _check_indices(record)
    return "".join(span.text for span in record.spans)


def think_text(record: SynthesisRecord) -> str:
    return "".join(s.text for s in record.spans if s.role is Role.THINK)


def answer_text(record: SynthesisRecord) -> str:
    return "".join(s.text for s in record.spans if s.role is Role.ANSWER)


def _check_indices(record: SynthesisRecord) -> None:
    for position, span in enumerate(record.spans):
        if span.index != position:
            raise StructuralError(
                f"record {record.id}: partition violation, span at position "
                f"{position} has index {span.index}"
            )


# Expected span origins per strategy; None means either origin is fine.
_SINGLE_ORIGIN = {
    "teacher-only": Origin.TEACHER,
    "student-only": Origin.STUDENT,
    "reject-sampling": Origin.STUDENT,
    "self-distillation": Origin.STUDENT,
}
_PHASE_ORIGIN = {
    "teacher-answer": {Role.THINK: Origin.STUDENT, Role.ANSWER: Origin.TEACHER},
    "teacher-think": {Role.THINK: Origin.TEACHER, Role.ANSWER: Origin.STUDENT},
}
KNOWN_STRATEGIES = (
    "tessy",
    "teacher-only",
    "student-only",
    "teacher-mix",
    "reject-sampling",
    "self-distillation",
    "teacher-answer",
    "teacher-think",
)


def validate_record(record: SynthesisRecord) -> list[str]:
    """Return a list of invariant violations; empty means the record is clean.

    Individual span invariants are enforced at construction, so this focuses
    on cross-span structure: the index partition, role ordering, strategy
    origin rules, and marker hygiene (when meta carries the marker).
    """
    issues: list[str] = []
    for position, span in enumerate(record.spans):
        if span.index != position:
            issues.append(
                f"partition violation: span at position {position} has index {span.index}"
            )
            break
    seen_answer = False
    for span in record.spans:
        if span.role is Role.ANSWER:
            seen_answer = True
        elif seen_answer:
            issues.append("role order violation: Think span after an Answer span")
            break
    if not isinstance(record.terminated_by, TerminationReason):
        issues.append(f"unknown termination reason {record.terminated_by!r}")

    strategy = record.strategy
    if strategy in KNOWN_STRATEGIES:
        answer_spans = [s for s in record.spans if s.role is Role.ANSWER]
        if not answer_spans:
            issues.append("no Answer span present")
        if strategy == "tessy":
            if record.spans and record.spans[0].origin is not Origin.STUDENT:
                issues.append("first span of a tessy record must be student-origin")
            if any(s.origin is not Origin.STUDENT for s in answer_spans):
                issues.append("tessy Answer spans must be student-origin")
            think_spans = [s for s in record.spans if s.role is Role.THINK]
            for left, right in zip(think_spans, think_spans[1:]):
                switched = left.origin is not right.origin
                if switched != left.truncated:
                    issues.append(
                        f"switch-iff-truncated violation between spans "
                        f"{left.index} and {right.index}"
                    )
                    break
        elif strategy in _SINGLE_ORIGIN:
            want = _SINGLE_ORIGIN[strategy]
            if any(s.origin is not want for s in record.spans):
                issues.append(f"{strategy} records must be {want.value}-origin only")
        elif strategy in _PHASE_ORIGIN:
            rules = _PHASE_ORIGIN[strategy]
            for span in record.spans:
                if span.origin is not rules[span.role]:
                    issues.append(
                        f"{strategy}: {span.role.value} span {span.index} has "
                        f"origin {span.origin.value}"
                    )
                    break
        # teacher-mix records are single-origin, but either origin is valid.
        elif strategy == "teacher-mix":
            origins = {s.origin for s in record.spans}
            if len(origins) > 1:
                issues.append("teacher-mix records must use a single origin")

    marker = record.meta.get("end_of_think_marker") if isinstance(record.meta, dict) else None
    if isinstance(marker, str) and marker:
        think = think_text(record)
        count = think.count(marker)
        if record.terminated_by is TerminationReason.END_OF_THINK_MARKER:
            if count != 1 or not think.endswith(marker):
                issues.append("marker hygiene violation: marker not exactly at think end")
        elif count != 0:
            issues.append("marker hygiene violation: marker present without marker termination")
    return issues
