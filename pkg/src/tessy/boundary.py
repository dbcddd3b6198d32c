"""Boundary prediction: where a generated block stops being useful.

Student blocks are judged against the Style target (keep the leading style
run, roll back at the first capability unit); teacher blocks against the
Capability target (roll back at the first style unit). The built-in lexicon
predictor is deterministic and doubles as the reference implementation for
the /v1/label wire protocol.

Lexicon unit contract (shared with any conforming remote service):
  * units are whitespace-delimited words; each unit runs from the start of
    its first word to the start of the next unit's word (the final unit
    extends to the end of the text, the first absorbs leading whitespace),
    so units tile the text exactly;
  * a word matches the lexicon after lowercasing and stripping leading and
    trailing non-alphanumeric characters;
  * multi-word lexicon phrases are matched greedily left-to-right, longest
    phrase first; matched words merge into a single style unit;
  * text without any word is a single capability unit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .core import PredictorSelector
from .errors import ProtocolError, StructuralError

_WORD_RE = re.compile(r"\S+")


class BoundaryTarget(str, Enum):
    """Which token family the caller wants to keep. Also used as a unit label."""

    STYLE = "style"
    CAPABILITY = "capability"


@dataclass(frozen=True)
class LabeledUnit:
    start: int
    end: int
    label: BoundaryTarget


@dataclass(frozen=True)
class BoundaryVerdict:
    """Keep-prefix decision, optionally with the per-unit labels behind it."""

    keep_prefix_chars: int
    units: tuple[LabeledUnit, ...] | None = None

    def __post_init__(self):
        if self.keep_prefix_chars < 0:
            raise StructuralError("keep_prefix_chars must be >= 0")


DEFAULT_STYLE_WORDS = (
    "okay",
    "wait",
    "hmm",
    "so",
    "let's",
    "but",
    "let me",
    "i think",
    "alright",
    "now",
)


def normalize_word(word: str) -> str:
    """Lowercase and strip non-alphanumeric characters from both ends."""
    word = word.lower()
    start = 0
    end = len(word)
    while start < end and not word[start].isalnum():
        start += 1
    while end > start and not word[end - 1].isalnum():
        end -= 1
    return word[start:end]


class StyleLexicon:
    """A set of style words and multi-word phrases, matched case-insensitively."""

    def __init__(self, entries: Iterable[str] = DEFAULT_STYLE_WORDS):
        singles: set[str] = set()
        phrases: list[tuple[str, ...]] = []
        for entry in entries:
            parts = tuple(normalize_word(p) for p in entry.split())
            parts = tuple(p for p in parts if p)
            if not parts:
                continue
            if len(parts) == 1:
                singles.add(parts[0])
            else:
                phrases.append(parts)
        self.singles = frozenset(singles)
        # Longest first so greedy matching prefers the longest phrase.
        self.phrases = tuple(sorted(phrases, key=len, reverse=True))

    @classmethod
    def default(cls) -> "StyleLexicon":
        return cls(DEFAULT_STYLE_WORDS)


def label_units(text: str, lexicon: StyleLexicon) -> tuple[LabeledUnit, ...]:
    """Tile the text into labeled units per the lexicon unit contract."""
    words = [(m.start(), m.end()) for m in _WORD_RE.finditer(text)]
    if not words:
        return (LabeledUnit(0, len(text), BoundaryTarget.CAPABILITY),)
    normalized = [normalize_word(text[s:e]) for s, e in words]
    units: list[LabeledUnit] = []
    i = 0
    n = len(words)
    while i < n:
        span_words = 1
        label = BoundaryTarget.CAPABILITY
        for phrase in lexicon.phrases:
            width = len(phrase)
            if i + width <= n and tuple(normalized[i:i + width]) == phrase:
                span_words = width
                label = BoundaryTarget.STYLE
                break
        if span_words == 1 and normalized[i] in lexicon.singles:
            label = BoundaryTarget.STYLE
        j = i + span_words
        start = 0 if i == 0 else words[i][0]
        end = len(text) if j == n else words[j][0]
        units.append(LabeledUnit(start, end, label))
        i = j
    return tuple(units)


def verdict_from_units(units: Sequence[LabeledUnit], target: BoundaryTarget,
                       text_length: int) -> BoundaryVerdict:
    """Keep everything up to the first unit whose label differs from target."""
    keep = text_length
    for unit in units:
        if unit.label is not target:
            keep = unit.start
            break
    return BoundaryVerdict(keep_prefix_chars=keep, units=tuple(units))


class LexiconPredictor:
    """Deterministic predictor backed by a style lexicon."""

    def __init__(self, lexicon: StyleLexicon | None = None):
        self.lexicon = lexicon or StyleLexicon.default()

    def predict(self, text: str, target: BoundaryTarget) -> BoundaryVerdict:
        if not text:
            raise ValueError("cannot predict a boundary on empty text")
        units = label_units(text, self.lexicon)
        return verdict_from_units(units, target, len(text))


class RemotePredictor:
    """Client for the /v1/label wire protocol; shares the gateway's limits."""

    def __init__(self, gateway, url: str):
        self._gateway = gateway
        self._url = url.rstrip("/")

    def predict(self, text: str, target: BoundaryTarget) -> BoundaryVerdict:
        if not text:
            raise ValueError("cannot predict a boundary on empty text")
        data = self._gateway.post_json(
            self._url + "/v1/label", {"text": text, "target": target.value}
        )
        keep = data.get("keep_prefix_chars")
        if not isinstance(keep, int) or isinstance(keep, bool):
            raise ProtocolError("label response missing integer keep_prefix_chars")
        if not (0 <= keep <= len(text)):
            raise ProtocolError(
                f"remote verdict keep_prefix_chars {keep} outside [0, {len(text)}]"
            )
        units_raw = data.get("units")
        units: tuple[LabeledUnit, ...] | None = None
        if units_raw is not None:
            units = _parse_remote_units(units_raw, len(text))
            recomputed = verdict_from_units(units, target, len(text)).keep_prefix_chars
            if recomputed != keep:
                raise ProtocolError(
                    f"remote verdict inconsistent: units imply keep {recomputed}, "
                    f"response says {keep}"
                )
        return BoundaryVerdict(keep_prefix_chars=keep, units=units)


def _parse_remote_units(raw, text_length: int) -> tuple[LabeledUnit, ...]:
    if not isinstance(raw, list):
        raise ProtocolError("label response units must be a list")
    units: list[LabeledUnit] = []
    for item in raw:
        if not isinstance(item, dict):
            raise ProtocolError("label response unit must be an object")
        try:
            unit = LabeledUnit(int(item["start"]), int(item["end"]), BoundaryTarget(item["label"]))
        except (KeyError, ValueError) as exc:
            raise ProtocolError(f"malformed label unit {item!r}") from exc
        units.append(unit)
    cursor = 0
    for unit in units:
        if unit.start != cursor or unit.end < unit.start:
            raise ProtocolError("label response units do not tile the text")
        cursor = unit.end
    if cursor != text_length:
        raise ProtocolError("label response units do not cover the text")
    return tuple(units)


def predict_boundary(predictor, text: str, target: BoundaryTarget) -> BoundaryVerdict:
    """Ask a predictor (lexicon or remote) where to cut the block."""
    return predictor.predict(text, target)


def truncate_span(raw_text: str, verdict: BoundaryVerdict) -> tuple[str, bool]:
    """Apply a verdict; returns (retained_text, truncated)."""
    keep = verdict.keep_prefix_chars
    if keep > len(raw_text):
        raise StructuralError(
            f"verdict keeps {keep} chars of a {len(raw_text)}-char block"
        )
    retained = raw_text[:keep]
    return retained, keep < len(raw_text)


def trim_partial_word(retained: str) -> str:
    """Drop a trailing partial word after a mid-word cut.

    No-op when the text is empty, ends with whitespace, or the tail after the
    last whitespace has no alphanumeric character. Otherwise the final
    whitespace-delimited word is removed and the whitespace before it kept.
    """
    if not retained or retained[-1].isspace():
        return retained
    cut = len(retained)
    while cut > 0 and not retained[cut - 1].isspace():
        cut -= 1
    tail = retained[cut:]
    if not any(ch.isalnum() for ch in tail):
        return retained
    return retained[:cut]


def build_predictor(selector: PredictorSelector, gateway=None):
    """Materialize a predictor from its config selector."""
    if selector.kind == "lexicon":
        if selector.style_words is None:
            return LexiconPredictor()
        return LexiconPredictor(StyleLexicon(selector.style_words))
    if gateway is None:
        raise ValueError("remote predictor requires a gateway")
    return RemotePredictor(gateway, selector.url or "")
