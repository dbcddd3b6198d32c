"""Dataset plumbing: prompt and record JSONL, config files, SFT export.

Record lines are written with a fixed key order and compact separators so a
given batch serializes to identical bytes on every run.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .core import (
    Origin,
    Role,
    Span,
    SynthesisConfig,
    SynthesisRecord,
    TerminationReason,
    answer_text,
    think_text,
    validate_record,
)
from .errors import ConfigError, StructuralError

CONFIG_ENV_VAR = "TESSY_CONFIG"


@dataclass(frozen=True)
class PromptEntry:
    """One input question; tags are free-form routing labels."""

    id: str
    question: str
    tags: tuple[str, ...] | None = None


def read_prompts(path) -> list[PromptEntry]:
    """Parse a prompts JSONL file; errors carry 1-based line numbers."""
    entries: list[PromptEntry] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {line_number}: invalid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise ValueError(f"{path}: line {line_number}: entry is not an object")
            entry_id = data.get("id")
            question = data.get("question")
            if not isinstance(entry_id, str) or not entry_id:
                raise ValueError(f"{path}: line {line_number}: missing string 'id'")
            if not isinstance(question, str) or not question:
                raise ValueError(f"{path}: line {line_number}: missing string 'question'")
            tags = data.get("tags")
            if tags is not None and (
                not isinstance(tags, list) or any(not isinstance(t, str) for t in tags)
            ):
                raise ValueError(f"{path}: line {line_number}: 'tags' must be a list of strings")
            unknown = set(data) - {"id", "question", "tags"}
            if unknown:
                raise ValueError(
                    f"{path}: line {line_number}: unknown fields {sorted(unknown)}"
                )
            if entry_id in seen:
                raise ValueError(
                    f"{path}: line {line_number}: duplicate id {entry_id!r} "
                    f"(first seen on line {seen[entry_id]})"
                )
            seen[entry_id] = line_number
            entries.append(
                PromptEntry(id=entry_id, question=question,
                            tags=tuple(tags) if tags is not None else None)
            )
    return entries


def write_prompts(entries: Iterable[PromptEntry], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for entry in entries:
            data: dict[str, Any] = {"id": entry.id, "question": entry.question}
            if entry.tags is not None:
                data["tags"] = list(entry.tags)
            handle.write(json.dumps(data, ensure_ascii=False, separators=(",", ":")) + "\n")


def record_to_dict(record: SynthesisRecord) -> dict[str, Any]:
    return {
        "id": record.id,
        "prompt": record.prompt,
        "strategy": record.strategy,
        "config_fingerprint": record.config_fingerprint,
        "terminated_by": record.terminated_by.value,
        "spans": [
            {
                "index": span.index,
                "origin": span.origin.value,
                "role": span.role.value,
                "text": span.text,
                "truncated": span.truncated,
                "raw_length_chars": span.raw_length_chars,
            }
            for span in record.spans
        ],
        "meta": record.meta,
    }


_RECORD_FIELDS = {"id", "prompt", "strategy", "config_fingerprint",
                  "terminated_by", "spans", "meta"}
_SPAN_FIELDS = {"index", "origin", "role", "text", "truncated", "raw_length_chars"}


def record_from_dict(data: dict[str, Any]) -> SynthesisRecord:
    if not isinstance(data, dict):
        raise StructuralError("record line is not a JSON object")
    missing = _RECORD_FIELDS - set(data)
    if missing:
        raise StructuralError(f"record missing fields {sorted(missing)}")
    unknown = set(data) - _RECORD_FIELDS
    if unknown:
        raise StructuralError(f"record has unknown fields {sorted(unknown)}")
    if not isinstance(data["spans"], list):
        raise StructuralError("record 'spans' must be an array")
    spans = []
    for item in data["spans"]:
        if not isinstance(item, dict):
            raise StructuralError("span entry is not an object")
        span_missing = _SPAN_FIELDS - set(item)
        if span_missing:
            raise StructuralError(f"span missing fields {sorted(span_missing)}")
        if not isinstance(item["text"], str):
            raise StructuralError("span 'text' must be a string")
        if not isinstance(item["truncated"], bool):
            raise StructuralError("span 'truncated' must be a boolean")
        if not isinstance(item["index"], int) or isinstance(item["index"], bool):
            raise StructuralError("span 'index' must be an integer")
        if not isinstance(item["raw_length_chars"], int) or isinstance(item["raw_length_chars"], bool):
            raise StructuralError("span 'raw_length_chars' must be an integer")
        try:
            spans.append(
                Span(
                    index=item["index"],
                    origin=Origin(item["origin"]),
                    role=Role(item["role"]),
                    text=item["text"],
                    truncated=item["truncated"],
                    raw_length_chars=item["raw_length_chars"],
                )
            )
        except ValueError as exc:
            raise StructuralError(f"malformed span: {exc}") from exc
    try:
        terminated = TerminationReason(data["terminated_by"])
    except ValueError as exc:
        raise StructuralError(
            f"unknown terminated_by {data['terminated_by']!r}"
        ) from exc
    meta = data["meta"]
    if not isinstance(meta, dict):
        raise StructuralError("record 'meta' must be an object")
    return SynthesisRecord(
        id=data["id"],
        prompt=data["prompt"],
        spans=tuple(spans),
        strategy=data["strategy"],
        config_fingerprint=data["config_fingerprint"],
        terminated_by=terminated,
        meta=meta,
    )


def record_to_line(record: SynthesisRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False, separators=(",", ":"))


def write_records(records: Iterable[SynthesisRecord], path) -> None:
    """Serialize records; invariant violations abort before any write."""
    records = list(records)
    for record in records:
        issues = validate_record(record)
        if issues:
            raise StructuralError(f"record {record.id}: {issues[0]}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(record_to_line(record) + "\n")


def read_records(path, *, validate: bool = True) -> list[SynthesisRecord]:
    """Parse a records JSONL file, enforcing invariants per record."""
    records: list[SynthesisRecord] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StructuralError(
                    f"{path}: line {line_number}: invalid JSON: {exc}"
                ) from exc
            record = record_from_dict(data)
            if validate:
                issues = validate_record(record)
                if issues:
                    raise StructuralError(
                        f"{path}: line {line_number}: record {record.id}: {issues[0]}"
                    )
            records.append(record)
    return records


def audit_records(path) -> list[str]:
    """Collect every problem in a records file instead of stopping at the first."""
    problems: list[str] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"line {line_number}: invalid JSON: {exc}")
                continue
            try:
                record = record_from_dict(data)
            except StructuralError as exc:
                problems.append(f"line {line_number}: {exc}")
                continue
            for issue in validate_record(record):
                problems.append(f"line {line_number}: record {record.id}: {issue}")
    return problems


_CLOSING_TAG_RE = re.compile(r"^</(.+)>$")


def export_sft(records: Iterable[SynthesisRecord], path) -> int:
    """Write plain prompt/response pairs for supervised fine-tuning.

    The response is the think text closed by the end marker (appended when a
    budget or endpoint stop cut the trajectory short) followed by the answer
    text. When the marker looks like a closing tag the matching opening tag
    is prepended.
    """
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            marker = record.meta.get("end_of_think_marker", "")
            think = think_text(record)
            if marker and not think.endswith(marker):
                think = think + marker
            opener = ""
            if marker:
                match = _CLOSING_TAG_RE.match(marker)
                if match:
                    opener = f"<{match.group(1)}>"
            response = opener + think + answer_text(record)
            line = json.dumps(
                {"prompt": record.prompt, "response": response},
                ensure_ascii=False,
                separators=(",", ":"),
            )
            handle.write(line + "\n")
            count += 1
    return count


def load_config(path: str | os.PathLike | None = None,
                overrides: dict[str, Any] | None = None) -> SynthesisConfig:
    """Load a config JSON file, falling back to the TESSY_CONFIG env var.

    ``overrides`` are applied on top of the file's values before parsing, so
    command-line flags win over the file.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
        if not path:
            raise ConfigError(
                f"no config file given and {CONFIG_ENV_VAR} is not set"
            )
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    if overrides:
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    return SynthesisConfig.from_dict(data)
