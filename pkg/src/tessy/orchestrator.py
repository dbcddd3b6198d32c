"""Trajectory orchestration.

The alternating loop starts with the student, asks the generator for a block
of at most k tokens, scans it for the end-of-think marker, otherwise lets the
role's boundary predictor roll the block back, and hands the pen to the other
model whenever a rollback actually shortened the block. The student always
produces the final answer. Single-origin strategies reuse the same think and
answer phases without boundary prediction.
"""

from __future__ import annotations

import hashlib
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .boundary import (
    BoundaryTarget,
    build_predictor,
    predict_boundary,
    trim_partial_word,
    truncate_span,
)
from .core import (
    KNOWN_STRATEGIES,
    Origin,
    Role,
    Span,
    SynthesisConfig,
    SynthesisRecord,
    TerminationReason,
    fingerprint,
    reconstruct,
)
from .errors import ConfigError, StrategyError, TessyError, TrajectoryError
from .gateway import CompletionRequest, CompletionResult, FinishReason, HttpGateway, render_prompt

logger = logging.getLogger(__name__)

# Which token family each role is allowed to keep.
ROLE_TARGETS = {
    Origin.STUDENT: BoundaryTarget.STYLE,
    Origin.TEACHER: BoundaryTarget.CAPABILITY,
}


@dataclass
class TrajectoryState:
    """Mutable per-trajectory bookkeeping; owned by a single worker."""

    accumulated: str = ""
    current_role: Origin = Origin.STUDENT
    spans: list[Span] = field(default_factory=list)
    consecutive_empty: int = 0
    think_chars_used: int = 0
    phase: str = "thinking"


@dataclass(frozen=True)
class StrategySelector:
    """Names the synthesis strategy and its knobs."""

    name: str
    mix_ratio: float = 0.5
    n_candidates: int = 5

    def __post_init__(self):
        if self.name not in KNOWN_STRATEGIES:
            raise ConfigError(f"unknown strategy {self.name!r}")
        if not (0 < self.mix_ratio < 1):
            raise ConfigError(f"mix_ratio must be in (0, 1), got {self.mix_ratio}")
        if self.n_candidates < 2:
            raise ConfigError("n_candidates must be >= 2")


def _fill(template: str, **values: str) -> str:
    """Single-pass placeholder substitution; replacements are never rescanned."""
    pattern = re.compile("|".join(r"\{%s\}" % re.escape(k) for k in values))
    return pattern.sub(lambda m: values[m.group(0)[1:-1]], template)


def _marker_cut_end(prior_think: str, raw: str, marker: str) -> int | None:
    """Position in ``raw`` just past the first marker occurrence, if any.

    A window of the previous think text is prepended so a marker split across
    two blocks is still caught the moment it completes.
    """
    window = prior_think[-(len(marker) - 1):] if len(marker) > 1 else ""
    combined = window + raw
    idx = combined.find(marker)
    if idx == -1:
        return None
    return idx + len(marker) - len(window)


_FIRST_WORD_RE = re.compile(r"\s*\S+")


def _first_word_prefix(raw: str) -> str:
    match = _FIRST_WORD_RE.match(raw)
    return match.group(0) if match else raw


def _append(state: TrajectoryState, origin: Origin, role: Role, text: str,
            raw_length: int, truncated: bool) -> None:
    span = Span(
        index=len(state.spans),
        origin=origin,
        role=role,
        text=text,
        truncated=truncated,
        raw_length_chars=raw_length,
    )
    state.spans.append(span)
    state.accumulated += text
    if role is Role.THINK:
        state.think_chars_used += len(text)


def _complete(gateway, profile, body: str, max_tokens: int) -> CompletionResult:
    request = CompletionRequest(
        prompt=render_prompt(profile, body),
        max_tokens=max_tokens,
        temperature=profile.sampling.temperature,
        top_p=profile.sampling.top_p,
    )
    return gateway.complete(profile, request)


def _think_alternating(question: str, config: SynthesisConfig, gateway,
                       predictors: Mapping[Origin, object],
                       state: TrajectoryState) -> TerminationReason:
    profiles = {Origin.STUDENT: config.student, Origin.TEACHER: config.teacher}
    marker = config.end_of_think_marker
    families_differ = config.student.vocab_family != config.teacher.vocab_family
    while True:
        if state.think_chars_used >= config.think_budget_chars:
            return TerminationReason.BUDGET_EXHAUSTED
        origin = state.current_role
        result = _complete(gateway, profiles[origin], question + state.accumulated,
                           config.k_max_tokens)
        raw = result.text
        if raw == "":
            # A generator with nothing to say cannot make progress; stop here.
            return TerminationReason.ENDPOINT_STOP
        cut = _marker_cut_end(state.accumulated, raw, marker)
        if cut is not None:
            text = raw[:cut]
            _append(state, origin, Role.THINK, text, len(raw), len(text) < len(raw))
            return TerminationReason.END_OF_THINK_MARKER
        if result.finish_reason is FinishReason.ENDPOINT_STOP:
            _append(state, origin, Role.THINK, raw, len(raw), False)
            return TerminationReason.ENDPOINT_STOP
        if state.consecutive_empty >= config.zero_progress_limit:
            # Forced progress: keep the first word untruncated so the same
            # generator continues, breaking predictor deadlocks.
            text = _first_word_prefix(raw)
            _append(state, origin, Role.THINK, text, len(text), False)
            state.consecutive_empty = 0
            continue
        verdict = predict_boundary(predictors[origin], raw, ROLE_TARGETS[origin])
        retained, truncated = truncate_span(raw, verdict)
        if truncated and config.vocab_mismatch_trim and families_differ:
            retained = trim_partial_word(retained)
        _append(state, origin, Role.THINK, retained, len(raw), truncated)
        state.consecutive_empty = state.consecutive_empty + 1 if retained == "" else 0
        if truncated:
            state.current_role = (
                Origin.TEACHER if origin is Origin.STUDENT else Origin.STUDENT
            )


def _think_single(question: str, config: SynthesisConfig, gateway, profile,
                  origin: Origin, state: TrajectoryState) -> TerminationReason:
    marker = config.end_of_think_marker
    while True:
        if state.think_chars_used >= config.think_budget_chars:
            return TerminationReason.BUDGET_EXHAUSTED
        result = _complete(gateway, profile, question + state.accumulated,
                           config.bulk_block_tokens)
        raw = result.text
        if raw == "":
            return TerminationReason.ENDPOINT_STOP
        cut = _marker_cut_end(state.accumulated, raw, marker)
        if cut is not None:
            text = raw[:cut]
            _append(state, origin, Role.THINK, text, len(raw), len(text) < len(raw))
            return TerminationReason.END_OF_THINK_MARKER
        _append(state, origin, Role.THINK, raw, len(raw), False)
        if result.finish_reason is not FinishReason.LENGTH:
            return TerminationReason.ENDPOINT_STOP


def _answer_phase(question: str, config: SynthesisConfig, gateway, profile,
                  origin: Origin, state: TrajectoryState) -> None:
    state.phase = "answering"
    answer_chars = 0
    appended = 0
    while True:
        result = _complete(gateway, profile, question + state.accumulated,
                           config.bulk_block_tokens)
        text = result.text
        if text == "" and appended > 0:
            break
        _append(state, origin, Role.ANSWER, text, len(text), False)
        appended += 1
        answer_chars += len(text)
        if result.finish_reason is not FinishReason.LENGTH:
            break
        if text == "" or answer_chars >= config.answer_budget_chars:
            break
    state.phase = "done"


def _base_meta(config: SynthesisConfig) -> dict:
    return {"end_of_think_marker": config.end_of_think_marker}


def synthesize_tessy(prompt: str, config: SynthesisConfig, *, gateway,
                     record_id: str = "0",
                     predictors: Mapping[Origin, object] | None = None) -> SynthesisRecord:
    """Run the alternating student/teacher loop for one prompt."""
    state = TrajectoryState()
    if predictors is None:
        predictors = {
            Origin.STUDENT: build_predictor(config.student_predictor, gateway),
            Origin.TEACHER: build_predictor(config.teacher_predictor, gateway),
        }
    try:
        terminated = _think_alternating(prompt, config, gateway, predictors, state)
        _answer_phase(prompt, config, gateway, config.student, Origin.STUDENT, state)
    except TessyError as exc:
        raise TrajectoryError(f"trajectory {record_id} failed: {exc}", state=state) from exc
    return SynthesisRecord(
        id=record_id,
        prompt=prompt,
        spans=tuple(state.spans),
        strategy="tessy",
        config_fingerprint=fingerprint(config),
        terminated_by=terminated,
        meta=_base_meta(config),
    )


def _single_origin(prompt: str, config: SynthesisConfig, gateway,
                   think_origin: Origin, answer_origin: Origin, record_id: str,
                   strategy: str, extra_meta: dict | None = None,
                   effective_prompt: str | None = None) -> SynthesisRecord:
    profiles = {Origin.STUDENT: config.student, Origin.TEACHER: config.teacher}
    state = TrajectoryState(current_role=think_origin)
    question = effective_prompt if effective_prompt is not None else prompt
    try:
        terminated = _think_single(question, config, gateway,
                                   profiles[think_origin], think_origin, state)
        _answer_phase(question, config, gateway, profiles[answer_origin],
                      answer_origin, state)
    except TessyError as exc:
        raise TrajectoryError(f"trajectory {record_id} failed: {exc}", state=state) from exc
    meta = _base_meta(config)
    if extra_meta:
        meta.update(extra_meta)
    return SynthesisRecord(
        id=record_id,
        prompt=prompt,
        spans=tuple(state.spans),
        strategy=strategy,
        config_fingerprint=fingerprint(config),
        terminated_by=terminated,
        meta=meta,
    )


def _unit_interval(seed: int, record_id: str, tag: str) -> float:
    """Deterministic pseudo-uniform in [0, 1) from (seed, record id, tag)."""
    digest = hashlib.sha256(f"{seed}:{record_id}:{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0 ** 64


def _default_judge(question: str, candidates: Sequence[SynthesisRecord],
                   config: SynthesisConfig, gateway) -> int:
    """Teacher-scored 1..10; ties keep the lowest candidate index."""
    best_index = 0
    best_score = -1
    for i, candidate in enumerate(candidates):
        body = _fill(config.judge_template, question=question,
                     candidate=reconstruct(candidate))
        result = _complete(gateway, config.teacher, body, 16)
        match = re.search(r"\d+", result.text)
        if match is None:
            raise StrategyError(f"judge returned no score for candidate {i}")
        score = max(1, min(10, int(match.group(0))))
        if score > best_score:
            best_index, best_score = i, score
    return best_index


def synthesize_baseline(prompt: str, selector: StrategySelector,
                        config: SynthesisConfig, *, gateway,
                        record_id: str = "0", seed: int = 0,
                        judge: Callable[[Sequence[SynthesisRecord]], int] | None = None) -> SynthesisRecord:
    """Run one of the non-alternating strategies for one prompt."""
    name = selector.name
    if name == "teacher-only":
        return _single_origin(prompt, config, gateway, Origin.TEACHER,
                              Origin.TEACHER, record_id, name)
    if name == "student-only":
        return _single_origin(prompt, config, gateway, Origin.STUDENT,
                              Origin.STUDENT, record_id, name)
    if name == "teacher-answer":
        return _single_origin(prompt, config, gateway, Origin.STUDENT,
                              Origin.TEACHER, record_id, name)
    if name == "teacher-think":
        return _single_origin(prompt, config, gateway, Origin.TEACHER,
                              Origin.STUDENT, record_id, name)
    if name == "teacher-mix":
        pick_teacher = _unit_interval(seed, record_id, "teacher-mix") < selector.mix_ratio
        chosen = Origin.TEACHER if pick_teacher else Origin.STUDENT
        return _single_origin(prompt, config, gateway, chosen, chosen, record_id,
                              name, extra_meta={"mix_choice": chosen.value})
    if name == "self-distillation":
        reference_state = TrajectoryState()
        try:
            _answer_phase(prompt, config, gateway, config.teacher, Origin.TEACHER,
                          reference_state)
        except TessyError as exc:
            raise TrajectoryError(
                f"trajectory {record_id} failed building the reference answer: {exc}",
                state=reference_state,
            ) from exc
        reference = reference_state.accumulated
        effective = _fill(config.self_distill_template, question=prompt,
                          reference=reference)
        return _single_origin(prompt, config, gateway, Origin.STUDENT,
                              Origin.STUDENT, record_id, name,
                              extra_meta={"reference_answer": reference},
                              effective_prompt=effective)
    if name == "reject-sampling":
        candidates = [
            _single_origin(prompt, config, gateway, Origin.STUDENT,
                           Origin.STUDENT, f"{record_id}#cand{i}", "student-only")
            for i in range(selector.n_candidates)
        ]
        if judge is not None:
            chosen_index = judge(candidates)
        else:
            chosen_index = _default_judge(prompt, candidates, config, gateway)
        if not (0 <= chosen_index < len(candidates)):
            raise StrategyError(f"judge chose index {chosen_index} of {len(candidates)}")
        winner = candidates[chosen_index]
        meta = _base_meta(config)
        meta.update({"candidates": selector.n_candidates, "chosen_index": chosen_index})
        return SynthesisRecord(
            id=record_id,
            prompt=prompt,
            spans=winner.spans,
            strategy=name,
            config_fingerprint=winner.config_fingerprint,
            terminated_by=winner.terminated_by,
            meta=meta,
        )
    raise ConfigError(f"strategy {name!r} has no baseline implementation")


def synthesize(entry, selector: StrategySelector, config: SynthesisConfig, *,
               gateway, seed: int = 0, judge=None) -> SynthesisRecord:
    """Dispatch a prompt entry to the selected strategy."""
    if selector.name == "tessy":
        return synthesize_tessy(entry.question, config, gateway=gateway,
                                record_id=entry.id)
    return synthesize_baseline(entry.question, selector, config, gateway=gateway,
                               record_id=entry.id, seed=seed, judge=judge)


@dataclass
class BatchOutcome:
    prompt_id: str
    record: SynthesisRecord | None
    error: str | None


def run_batch(prompts: Sequence, selector: StrategySelector,
              config: SynthesisConfig, parallelism: int = 1, *,
              gateway=None, seed: int = 0, judge=None) -> list[BatchOutcome]:
    """Synthesize every prompt; failures are isolated, order is preserved."""
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")
    if gateway is None:
        gateway = HttpGateway(max_inflight=config.max_inflight_requests)
    outcomes: list[BatchOutcome | None] = [None] * len(prompts)

    def work(indexed) -> tuple[int, BatchOutcome]:
        i, entry = indexed
        try:
            record = synthesize(entry, selector, config, gateway=gateway,
                                seed=seed, judge=judge)
            return i, BatchOutcome(entry.id, record, None)
        except Exception as exc:  # noqa: BLE001 - per-prompt isolation
            logger.warning("prompt %s failed: %s", entry.id, exc)
            return i, BatchOutcome(entry.id, None, f"{type(exc).__name__}: {exc}")

    if parallelism == 1:
        results = map(work, enumerate(prompts))
    else:
        pool = ThreadPoolExecutor(max_workers=parallelism)
        try:
            results = list(pool.map(work, enumerate(prompts)))
        finally:
            pool.shutdown(wait=True)
    for i, outcome in results:
        outcomes[i] = outcome
    return outcomes  # type: ignore[return-value]
