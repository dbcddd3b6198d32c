"""Span annotation for predictor training corpora.

A large model is asked to copy out the transitional/filler/tone phrases from
a think-text segment as a strict JSON array. Reported strings are located by
a left-to-right scan (each match starts after the previous one ends) so
duplicates resolve deterministically; anything that is not verbatim is
rejected outright, never repaired.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .boundary import BoundaryTarget
from .core import Origin, Role, SynthesisRecord
from .errors import AnnotationFormatError, VerbatimViolationError

ANNOTATION_PROMPT_TEMPLATE = """You are a text analysis expert.

Task: Extract all spans of text that are transitional, filler, or tone-setting phrases.

What to extract:

- Include phrases or sentences that:
  - Express hesitation, tone, or attitude (e.g., "well", "okay", "so", "let's see", "I think")
  - Indicate transition or setup (e.g., "to begin with", "in this case", "for example", "but if")
  - Serve as narration or connection, not analysis

- Do not include:
  - Actual reasoning, deduction, or explanation
  - Code or formula descriptions
  - Problem-solving steps

Output format (STRICT JSON):

- Return a JSON array of strings, e.g.: ["<span 1>", "<span 2>", ...]
- Rules:
  1. Each span must be copied verbatim from the original text.
  2. Preserve order of appearance.
  3. If there are none, return an empty list: []
  4. Output only the JSON array - no explanation or extra text.

<input_text>
{think_text}
</input_text>"""


def render_annotation_prompt(segment_text: str) -> str:
    """Wrap a segment in the extraction prompt; byte-stable per segment."""
    if not segment_text:
        raise ValueError("segment_text must be non-empty")
    return ANNOTATION_PROMPT_TEMPLATE.replace("{think_text}", segment_text)


@dataclass(frozen=True)
class AnnotatedSegment:
    """A think-text segment with character ranges of its style spans."""

    text: str
    style_spans: tuple[tuple[int, int], ...]
    source: Origin

    def __post_init__(self):
        previous_end = 0
        for start, end in self.style_spans:
            if start < previous_end:
                raise AnnotationFormatError(
                    f"style spans out of order or overlapping at {start}"
                )
            if end <= start or end > len(self.text):
                raise AnnotationFormatError(f"style span ({start}, {end}) out of bounds")
            previous_end = end


def extract_json_array(raw: str) -> str:
    """Return the first top-level JSON array substring of ``raw``.

    Tolerates surrounding prose and code fences; honors string literals and
    escapes while scanning for the matching bracket.
    """
    start = raw.find("[")
    if start == -1:
        raise AnnotationFormatError("no JSON array found in annotator output")
    depth = 0
    in_string = False
    escaped = False
    for pos in range(start, len(raw)):
        ch = raw[pos]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                return raw[start:pos + 1]
    raise AnnotationFormatError("unterminated JSON array in annotator output")


def parse_annotation(segment_text: str, annotator_output: str, *,
                     source: Origin) -> AnnotatedSegment:
    """Parse annotator output into verified character ranges."""
    array_text = extract_json_array(annotator_output)
    try:
        data = json.loads(array_text)
    except json.JSONDecodeError as exc:
        raise AnnotationFormatError(f"annotator output is not strict JSON: {exc}") from exc
    if not isinstance(data, list):
        raise AnnotationFormatError("annotator output is not a JSON array")
    spans: list[tuple[int, int]] = []
    cursor = 0
    for item in data:
        if not isinstance(item, str):
            raise AnnotationFormatError(f"annotated span {item!r} is not a string")
        if item == "":
            raise AnnotationFormatError("annotated span is an empty string")
        found = segment_text.find(item, cursor)
        if found == -1:
            raise VerbatimViolationError(
                f"span {item!r} not found verbatim after offset {cursor}"
            )
        spans.append((found, found + len(item)))
        cursor = found + len(item)
    return AnnotatedSegment(text=segment_text, style_spans=tuple(spans), source=source)


def labels_from_segment(segment: AnnotatedSegment) -> list[BoundaryTarget]:
    """Per-character labels: STYLE inside annotated spans, CAPABILITY elsewhere."""
    labels = [BoundaryTarget.CAPABILITY] * len(segment.text)
    for start, end in segment.style_spans:
        for i in range(start, end):
            labels[i] = BoundaryTarget.STYLE
    return labels


_SENTENCE_BREAKS = ".!?\n"
_SNAP_SLACK = 120


def _snap_segment(text: str, start: int, end: int) -> tuple[int, int]:
    """Nudge a window onto sentence boundaries when one is close by."""
    for pos in range(start - 1, max(-1, start - 1 - _SNAP_SLACK), -1):
        if text[pos] in _SENTENCE_BREAKS:
            start = pos + 1
            break
    else:
        if start <= _SNAP_SLACK:
            start = 0
    while start < len(text) and text[start].isspace():
        start += 1
    limit = min(len(text), end + _SNAP_SLACK)
    for pos in range(end - 1, limit):
        if text[pos] in _SENTENCE_BREAKS:
            end = pos + 1
            break
    return start, end


@dataclass
class CorpusBuildReport:
    requested: int
    written: int
    skipped: int


def sample_segments(records: Iterable[SynthesisRecord],
                    origins: Sequence[Origin],
                    sample_count: int,
                    segment_length_chars: tuple[int, int],
                    seed: int) -> list[tuple[Origin, str]]:
    """Draw segment windows (with replacement) from per-origin think text."""
    low, high = segment_length_chars
    if not (0 < low <= high):
        raise ValueError("segment_length_chars must be a positive (low, high) pair")
    pool: list[tuple[Origin, str]] = []
    for record in records:
        for origin in origins:
            text = "".join(
                s.text for s in record.spans
                if s.role is Role.THINK and s.origin is origin
            )
            if text.strip():
                pool.append((origin, text))
    if not pool:
        raise ValueError("records contain no think text for the requested origins")
    weights = [len(text) for _, text in pool]
    rng = random.Random(seed)
    segments: list[tuple[Origin, str]] = []
    for _ in range(sample_count):
        origin, text = rng.choices(pool, weights=weights, k=1)[0]
        length = min(rng.randint(low, high), len(text))
        start = rng.randint(0, len(text) - length)
        snapped_start, snapped_end = _snap_segment(text, start, start + length)
        segment = text[snapped_start:snapped_end]
        if not segment:
            segment = text[start:start + length]
        segments.append((origin, segment))
    return segments


def build_predictor_corpus(records: Sequence[SynthesisRecord],
                           annotate_fn: Callable[[str], str],
                           out_path, *,
                           sample_count: int = 100_000,
                           segment_length_chars: tuple[int, int] = (200, 2000),
                           origins: Sequence[Origin] = (Origin.STUDENT, Origin.TEACHER),
                           seed: int = 0,
                           parallelism: int = 1) -> CorpusBuildReport:
    """Sample segments, annotate them, and write the labeled corpus JSONL.

    ``annotate_fn`` maps a rendered prompt to the annotator's raw output.
    Malformed or non-verbatim annotations are counted and skipped; transport
    errors propagate. Deterministic for a fixed seed and annotator.
    """
    segments = sample_segments(records, origins, sample_count,
                               segment_length_chars, seed)
    prompts = [render_annotation_prompt(seg) for _, seg in segments]
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outputs = list(pool.map(annotate_fn, prompts))
    else:
        outputs = [annotate_fn(p) for p in prompts]
    written = 0
    skipped = 0
    with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
        for (origin, segment), output in zip(segments, outputs):
            try:
                annotated = parse_annotation(segment, output, source=origin)
            except (AnnotationFormatError, VerbatimViolationError):
                skipped += 1
                continue
            line = json.dumps(
                {
                    "text": annotated.text,
                    "style_spans": [[s, e] for s, e in annotated.style_spans],
                    "source": annotated.source.value,
                },
                ensure_ascii=False,
                separators=(",", ":"),
            )
            handle.write(line + "\n")
            written += 1
    return CorpusBuildReport(requested=sample_count, written=written, skipped=skipped)
