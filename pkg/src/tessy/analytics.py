"""Corpus analytics: TF-IDF vectors, similarity, projection, and summaries.

Conventions are fixed so results are reproducible across runs: raw term
counts for tf, idf = ln(N/df) with no smoothing (df = N gives weight 0),
vocabulary indexed in sorted term order, covariance with divisor N-1, and a
sign convention that makes each projection axis's largest-magnitude
coordinate positive.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import Origin, Role, SynthesisRecord, reconstruct
from .errors import PairingError

_TOKEN_RE = re.compile(r"\w+")

Tokenizer = Callable[[str], list[str]]


def default_tokenizer(text: str) -> list[str]:
    """Lowercase word split on whitespace and punctuation."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class CorpusVector:
    """Sparse nonnegative TF-IDF vector; missing indices are zero weights."""

    doc_id: str
    entries: Mapping[int, float]


@dataclass(frozen=True)
class TfidfResult:
    terms: tuple[str, ...]
    vectors: tuple[CorpusVector, ...]


def tfidf_vectors(documents: Sequence[tuple[str, str]],
                  tokenizer: Tokenizer | None = None,
                  smooth_idf: bool = False) -> TfidfResult:
    """Vectorize (doc_id, text) pairs over a shared sorted vocabulary.

    With ``smooth_idf`` the weighting becomes ln((1+N)/(1+df)) + 1, which
    keeps corpus-wide terms visible instead of zeroing them out.
    """
    if not documents:
        raise ValueError("tfidf_vectors requires at least one document")
    tokenize = tokenizer or default_tokenizer
    token_lists = [tokenize(text) for _, text in documents]
    vocabulary = sorted({token for tokens in token_lists for token in tokens})
    index = {term: i for i, term in enumerate(vocabulary)}
    doc_count = len(documents)
    df = Counter()
    for tokens in token_lists:
        df.update(set(tokens))
    if smooth_idf:
        idf = {
            term: math.log((1 + doc_count) / (1 + df[term])) + 1.0
            for term in vocabulary
        }
    else:
        idf = {term: math.log(doc_count / df[term]) for term in vocabulary}
    vectors = []
    for (doc_id, _), tokens in zip(documents, token_lists):
        counts = Counter(tokens)
        entries = {
            index[term]: count * idf[term]
            for term, count in counts.items()
            if idf[term] != 0.0
        }
        vectors.append(CorpusVector(doc_id=doc_id, entries=entries))
    return TfidfResult(terms=tuple(vocabulary), vectors=tuple(vectors))


def cosine_similarity(a: CorpusVector, b: CorpusVector) -> float:
    """Cosine over sparse entries; any zero vector yields 0.0."""
    norm_a = math.sqrt(sum(v * v for v in a.entries.values()))
    norm_b = math.sqrt(sum(v * v for v in b.entries.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    smaller, larger = (a.entries, b.entries)
    if len(smaller) > len(larger):
        smaller, larger = larger, smaller
    dot = sum(value * larger.get(key, 0.0) for key, value in smaller.items())
    return dot / (norm_a * norm_b)


def mean_pairwise_similarity(group_a: Sequence[CorpusVector],
                             group_b: Sequence[CorpusVector]) -> float:
    """Average cosine over pairs sharing a doc (query) id across the groups."""
    by_id_a = {v.doc_id: v for v in group_a}
    by_id_b = {v.doc_id: v for v in group_b}
    if len(by_id_a) != len(group_a) or len(by_id_b) != len(group_b):
        raise PairingError("duplicate query ids within a group")
    if set(by_id_a) != set(by_id_b):
        missing = set(by_id_a).symmetric_difference(by_id_b)
        raise PairingError(f"unmatched query ids: {sorted(missing)[:5]}")
    if not by_id_a:
        raise PairingError("cannot average over zero pairs")
    ids = sorted(by_id_a)
    return sum(cosine_similarity(by_id_a[i], by_id_b[i]) for i in ids) / len(ids)


@dataclass(frozen=True)
class ProjectionReport:
    points: tuple[tuple[str, float, float], ...]
    component_axes: tuple[tuple[float, ...], tuple[float, ...]]
    explained_variance: tuple[float, float]


def _apply_sign_convention(axis: np.ndarray) -> np.ndarray:
    largest = int(np.argmax(np.abs(axis)))
    if axis[largest] < 0:
        return -axis
    return axis


def _canonical_completion(axes: list[np.ndarray], dimension: int,
                          needed: int) -> None:
    """Extend with canonical directions orthogonalized against chosen axes."""
    basis_index = 0
    while len(axes) < needed and basis_index < dimension:
        candidate = np.zeros(dimension)
        candidate[basis_index] = 1.0
        for axis in axes:
            candidate = candidate - np.dot(candidate, axis) * axis
        norm = float(np.linalg.norm(candidate))
        if norm > 1e-9:
            axes.append(_apply_sign_convention(candidate / norm))
        basis_index += 1


def pca_project(vectors: Sequence[CorpusVector], dimension: int | None = None,
                dims: int = 2) -> ProjectionReport:
    """Project vectors onto their top principal axes.

    When the vocabulary is larger than the document count the eigenproblem
    is solved on the document-space Gram matrix and mapped back, so the cost
    stays bounded by the corpus size. Degenerate (zero-variance) directions
    fall back to canonical axes with zero explained variance.
    """
    if len(vectors) < 2:
        raise ValueError("pca_project requires at least two vectors")
    if dims != 2:
        raise ValueError("this projection is fixed at two output dimensions")
    if dimension is None:
        dimension = 1 + max(
            (max(v.entries) for v in vectors if v.entries), default=-1
        )
    if dimension < dims:
        raise ValueError(
            f"vocabulary dimension {dimension} is too small for a {dims}-axis projection"
        )
    n = len(vectors)
    matrix = np.zeros((n, dimension))
    for row, vector in enumerate(vectors):
        for col, weight in vector.entries.items():
            matrix[row, col] = weight
    centered = matrix - matrix.mean(axis=0, keepdims=True)

    axes: list[np.ndarray] = []
    variances: list[float] = []
    if dimension > n:
        gram = centered @ centered.T / (n - 1)
        eigenvalues, eigenvectors = np.linalg.eigh(gram)
        order = np.argsort(eigenvalues)[::-1]
        for position in order[:dims]:
            value = float(eigenvalues[position])
            if value <= 1e-12:
                break
            mapped = centered.T @ eigenvectors[:, position]
            norm = float(np.linalg.norm(mapped))
            if norm <= 1e-12:
                break
            axes.append(_apply_sign_convention(mapped / norm))
            variances.append(value)
    else:
        covariance = centered.T @ centered / (n - 1)
        eigenvalues, eigenvectors = np.linalg.eigh(covariance)
        order = np.argsort(eigenvalues)[::-1]
        for position in order[:dims]:
            value = float(eigenvalues[position])
            if value <= 1e-12:
                break
            axes.append(_apply_sign_convention(eigenvectors[:, position].copy()))
            variances.append(value)

    _canonical_completion(axes, dimension, dims)
    while len(variances) < dims:
        variances.append(0.0)
    first, second = axes[0], axes[1]
    xs = centered @ first
    ys = centered @ second
    points = tuple(
        (vector.doc_id, float(xs[i]), float(ys[i])) for i, vector in enumerate(vectors)
    )
    return ProjectionReport(
        points=points,
        component_axes=(tuple(map(float, first)), tuple(map(float, second))),
        explained_variance=(variances[0], variances[1]),
    )


@dataclass(frozen=True)
class OriginRatio:
    teacher_fraction: float
    student_fraction: float


def origin_ratio(records: Iterable[SynthesisRecord], unit: str = "chars") -> OriginRatio:
    """Fraction of generated content per origin, by chars or words."""
    if unit not in ("chars", "words"):
        raise ValueError(f"unknown unit {unit!r}")
    totals = {Origin.STUDENT: 0, Origin.TEACHER: 0}
    for record in records:
        for span in record.spans:
            amount = len(span.text) if unit == "chars" else len(span.text.split())
            totals[span.origin] += amount
    grand = totals[Origin.STUDENT] + totals[Origin.TEACHER]
    if grand == 0:
        raise ValueError("records contain no countable content")
    return OriginRatio(
        teacher_fraction=totals[Origin.TEACHER] / grand,
        student_fraction=totals[Origin.STUDENT] / grand,
    )


@dataclass(frozen=True)
class LengthSummary:
    count: int
    mean: float
    median: float
    p25: float
    p75: float
    p95: float
    minimum: int
    maximum: int


@dataclass(frozen=True)
class LengthStats:
    unit: str
    per_strategy: dict[str, LengthSummary]
    mean_differences: tuple[tuple[str, str, float], ...]


def length_stats(records_by_strategy: Mapping[str, Sequence[SynthesisRecord]],
                 unit: str = "chars") -> LengthStats:
    """Length distributions per strategy plus pairwise mean differences."""
    if unit not in ("chars", "words"):
        raise ValueError(f"unknown unit {unit!r}")
    summaries: dict[str, LengthSummary] = {}
    for label in sorted(records_by_strategy):
        records = records_by_strategy[label]
        if not records:
            raise ValueError(f"strategy {label!r} has no records")
        lengths = []
        for record in records:
            text = reconstruct(record)
            lengths.append(len(text) if unit == "chars" else len(text.split()))
        data = np.asarray(lengths, dtype=float)
        summaries[label] = LengthSummary(
            count=len(lengths),
            mean=float(data.mean()),
            median=float(np.median(data)),
            p25=float(np.percentile(data, 25)),
            p75=float(np.percentile(data, 75)),
            p95=float(np.percentile(data, 95)),
            minimum=int(data.min()),
            maximum=int(data.max()),
        )
    labels = sorted(summaries)
    differences = tuple(
        (a, b, summaries[a].mean - summaries[b].mean)
        for i, a in enumerate(labels)
        for b in labels[i + 1:]
    )
    return LengthStats(unit=unit, per_strategy=summaries, mean_differences=differences)


@dataclass(frozen=True)
class WordFrequencyTable:
    labels: tuple[str, ...]
    words: tuple[str, ...]
    frequencies: tuple[tuple[float, ...], ...]  # rows follow ``words``

    def to_csv(self) -> str:
        lines = ["word," + ",".join(self.labels)]
        for word, row in zip(self.words, self.frequencies):
            lines.append(word + "," + ",".join(repr(value) for value in row))
        return "\n".join(lines) + "\n"


def word_frequency_table(corpora: Sequence[tuple[str, Sequence[str]]],
                         top_k: int = 30,
                         tokenizer: Tokenizer | None = None) -> WordFrequencyTable:
    """Relative word frequencies per corpus for the top-k most frequent words.

    Ranking is by the maximum relative frequency across corpora; ties break
    alphabetically so the table is stable.
    """
    if not corpora:
        raise ValueError("word_frequency_table requires at least one corpus")
    tokenize = tokenizer or default_tokenizer
    labels = tuple(label for label, _ in corpora)
    counts: list[Counter] = []
    totals: list[int] = []
    for _, documents in corpora:
        counter = Counter()
        for document in documents:
            counter.update(tokenize(document))
        counts.append(counter)
        totals.append(sum(counter.values()))
    vocabulary = set()
    for counter in counts:
        vocabulary.update(counter)

    def relative(word: str, i: int) -> float:
        return counts[i][word] / totals[i] if totals[i] else 0.0

    scored = sorted(
        vocabulary,
        key=lambda w: (-max(relative(w, i) for i in range(len(corpora))), w),
    )
    chosen = tuple(scored[:top_k])
    rows = tuple(
        tuple(relative(word, i) for i in range(len(corpora))) for word in chosen
    )
    return WordFrequencyTable(labels=labels, words=chosen, frequencies=rows)


_SVG_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf",
)


def render_pca_svg(report: ProjectionReport, labels_by_doc: Mapping[str, str],
                   width: int = 640, height: int = 480) -> str:
    """Deterministic scatter plot of a projection, one color per corpus label."""
    margin = 48
    xs = [x for _, x, _ in report.points]
    ys = [y for _, _, y in report.points]
    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(ys), max(ys)
    x_range = (x_max - x_min) or 1.0
    y_range = (y_max - y_min) or 1.0

    def sx(x: float) -> float:
        return margin + (x - x_min) / x_range * (width - 2 * margin)

    def sy(y: float) -> float:
        return height - margin - (y - y_min) / y_range * (height - 2 * margin)

    labels = sorted(set(labels_by_doc.values()))
    color = {label: _SVG_PALETTE[i % len(_SVG_PALETTE)] for i, label in enumerate(labels)}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="#888"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="#888"/>',
    ]
    for doc_id, x, y in report.points:
        label = labels_by_doc.get(doc_id, "")
        parts.append(
            f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" '
            f'fill="{color.get(label, "#444444")}" fill-opacity="0.7"/>'
        )
    for i, label in enumerate(labels):
        y = margin + 16 * i
        parts.append(
            f'<rect x="{width - margin - 110}" y="{y - 9}" width="10" height="10" '
            f'fill="{color[label]}"/>'
        )
        parts.append(
            f'<text x="{width - margin - 94}" y="{y}" font-size="12" '
            f'font-family="sans-serif">{label}</text>'
        )
    variance = report.explained_variance
    parts.append(
        f'<text x="{margin}" y="{margin - 12}" font-size="12" '
        f'font-family="sans-serif">explained variance: {variance[0]:.4g}, '
        f'{variance[1]:.4g}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
