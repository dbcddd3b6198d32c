"""Trainable per-word style classifier with a JSON model artifact.

Training consumes labeled-segment corpora in JSON Lines form, one object per
line with ``text`` (the segment), ``style_spans`` (character ranges of the
style words) and ``source``. Each whitespace word votes for the label its
characters carry; prediction is an add-one smoothed majority per normalized
word, with unseen words defaulting to capability.
"""

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import TrainingError
from .labeling import CAPABILITY, STYLE, WORD_RE, normalize_word

ARTIFACT_FORMAT = "unigram-style-classifier"


class UnigramClassifier:
    """Frozen per-word vote counts; each word is its own unit."""

    def __init__(self, counts):
        self._counts = {word: (int(s), int(c)) for word, (s, c) in counts.items()}

    def word_label(self, normalized: str) -> str:
        style, capability = self._counts.get(normalized, (0, 0))
        return STYLE if style + 1 > capability + 1 else CAPABILITY

    def group_words(self, normalized):
        return [(1, self.word_label(word)) for word in normalized]

    def to_artifact(self, seed: int, metrics: dict) -> dict:
        return {
            "format": ARTIFACT_FORMAT,
            "version": 1,
            "seed": seed,
            "counts": {w: list(c) for w, c in sorted(self._counts.items())},
            "metrics": metrics,
        }

    @classmethod
    def load(cls, path) -> "UnigramClassifier":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise TrainingError(f"cannot load model artifact {path}: {exc}") from exc
        if not isinstance(data, dict) or data.get("format") != ARTIFACT_FORMAT:
            raise TrainingError(f"{path} is not a {ARTIFACT_FORMAT} artifact")
        counts = data.get("counts")
        if not isinstance(counts, dict):
            raise TrainingError(f"{path} has no counts table")
        try:
            return cls({w: (int(pair[0]), int(pair[1]))
                        for w, pair in counts.items()})
        except (TypeError, ValueError, IndexError) as exc:
            raise TrainingError(f"{path} counts table is malformed: {exc}") from exc


@dataclass(frozen=True)
class TrainingReport:
    trained_records: int
    held_out_records: int
    metrics: dict
    model_path: str


def _parse_corpus_line(line: str, number: int):
    prefix = f"corpus line {number}"
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TrainingError(f"{prefix}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise TrainingError(f"{prefix}: expected an object")
    text = data.get("text")
    if not isinstance(text, str) or not text:
        raise TrainingError(f"{prefix}: text must be a non-empty string")
    spans_raw = data.get("style_spans")
    if not isinstance(spans_raw, list):
        raise TrainingError(f"{prefix}: style_spans must be a list")
    spans = []
    cursor = 0
    for item in spans_raw:
        ok = (isinstance(item, (list, tuple)) and len(item) == 2
              and all(isinstance(v, int) and not isinstance(v, bool) for v in item))
        if not ok:
            raise TrainingError(f"{prefix}: malformed style span {item!r}")
        start, end = item
        if not (cursor <= start < end <= len(text)):
            raise TrainingError(
                f"{prefix}: style span [{start}, {end}) out of order or out of bounds"
            )
        spans.append((start, end))
        cursor = end
    return text, tuple(spans)


def _word_rows(text: str, spans):
    """Yield (normalized_word, start, end, truth_label) per whitespace word."""
    for match in WORD_RE.finditer(text):
        start, end = match.span()
        hit = any(start < se and ss < end for ss, se in spans)
        yield (normalize_word(match.group()), start, end,
               STYLE if hit else CAPABILITY)


def _evaluate(classifier: UnigramClassifier, held) -> dict:
    tp = fp = fn = tn = 0
    for text, spans in held:
        truth = [False] * len(text)
        for start, end in spans:
            for i in range(start, end):
                truth[i] = True
        predicted = [False] * len(text)
        for word, start, end, _ in _word_rows(text, spans):
            if word and classifier.word_label(word) == STYLE:
                for i in range(start, end):
                    predicted[i] = True
        for t, p in zip(truth, predicted):
            if t and p:
                tp += 1
            elif p:
                fp += 1
            elif t:
                fn += 1
            else:
                tn += 1
    total = tp + fp + fn + tn
    return {
        "held_out_chars": total,
        "precision": tp / (tp + fp) if tp + fp else 1.0,
        "recall": tp / (tp + fn) if tp + fn else 1.0,
        "char_accuracy": (tp + tn) / total if total else 1.0,
    }


def train(corpus_path, model_out, *, seed: int = 0,
          holdout_fraction: float = 0.1) -> TrainingReport:
    """Fit word counts on 90% of the corpus, score characters on the rest.

    Deterministic for a fixed seed: the split is a seeded shuffle and the
    counts are order-independent. Writes the artifact to ``model_out``.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise TrainingError(f"holdout fraction {holdout_fraction} not in (0, 1)")
    rows = []
    try:
        with open(corpus_path, encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                rows.append(_parse_corpus_line(line, number))
    except OSError as exc:
        raise TrainingError(f"cannot read corpus {corpus_path}: {exc}") from exc
    if not rows:
        raise TrainingError(f"corpus {corpus_path} has no records")
    if len(rows) < 2:
        raise TrainingError("corpus needs at least two records for a held-out split")

    order = list(range(len(rows)))
    random.Random(seed).shuffle(order)
    held_count = max(1, round(len(rows) * holdout_fraction))
    held_count = min(held_count, len(rows) - 1)
    held = [rows[i] for i in order[:held_count]]
    fit = [rows[i] for i in order[held_count:]]

    counts: dict[str, list[int]] = {}
    for text, spans in fit:
        for word, _start, _end, label in _word_rows(text, spans):
            if not word:
                continue  # punctuation-only tokens carry no signal
            pair = counts.setdefault(word, [0, 0])
            pair[0 if label == STYLE else 1] += 1
    classifier = UnigramClassifier({w: tuple(c) for w, c in counts.items()})
    metrics = _evaluate(classifier, held)

    out = Path(model_out)
    out.parent.mkdir(parents=True, exist_ok=True)
    artifact = classifier.to_artifact(seed, metrics)
    out.write_text(json.dumps(artifact, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    return TrainingReport(trained_records=len(fit), held_out_records=len(held),
                          metrics=metrics, model_path=str(out))
