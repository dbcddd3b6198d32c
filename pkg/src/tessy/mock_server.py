"""Local fixture server speaking both wire protocols.

Two modes:
  * scripted: per-role entry queues, selected by a key substring of the
    request prompt (one entry consumed per call, cursors reset via /reset);
  * procedural: completions derived deterministically from (seed, model,
    prompt), so repeated identical requests return identical text and no
    state needs resetting.

The /v1/label endpoint always answers with the built-in lexicon predictor
(optionally over a custom word set), which makes the server usable as a
remote boundary predictor in end-to-end runs.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

from .boundary import BoundaryTarget, LexiconPredictor, StyleLexicon
from .core import Origin
from .errors import ConfigError
from .gateway import FinishReason, MockEntry, MockScript

_STYLEISH_WORDS = (
    "okay", "so", "wait", "hmm", "but", "now", "alright", "well", "maybe",
    "right",
)
_CAPABILITY_WORDS = (
    "compute", "gcd", "sum", "array", "loop", "modulo", "prime", "sort",
    "graph", "proof", "bound", "value", "index", "result", "case", "factor",
)
_ANSWER_WORDS = (
    "final", "answer", "the", "result", "is", "solution", "follows",
    "complete", "verified",
)


def _rng_for(seed: int, model: str, prompt: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}|{model}|{prompt}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


_WORD_RE = re.compile(r"\S+")


def procedural_annotation(segment: str) -> str:
    """Verbatim style-phrase list for a segment, as a JSON array string.

    The rule is fixed: a whitespace word is a style span when its lowercase
    alphanumeric core is one of the mock style words. Output order follows
    the text, so it always parses back losslessly.
    """
    spans = []
    for match in _WORD_RE.finditer(segment):
        word = match.group(0)
        start, end = 0, len(word)
        while start < end and not word[start].isalnum():
            start += 1
        while end > start and not word[end - 1].isalnum():
            end -= 1
        if word[start:end].lower() in _STYLEISH_WORDS:
            spans.append(word)
    return json.dumps(spans, ensure_ascii=False)


def procedural_completion(seed: int, model: str, prompt: str,
                          marker: str = "</think>") -> tuple[str, str]:
    """Deterministic (text, finish_reason) as a pure function of the inputs."""
    stripped = prompt.rstrip()
    if stripped.endswith("</input_text>"):
        opener = "<input_text>\n"
        head = stripped.rfind(opener)
        if head != -1:
            segment = stripped[head + len(opener):-len("\n</input_text>")]
            return procedural_annotation(segment), "stop"
    if stripped.endswith("Score:"):
        rng = _rng_for(seed, model, prompt)
        return str(1 + rng.randrange(10)), "stop"
    rng = _rng_for(seed, model, prompt)
    if marker in prompt:
        words = [rng.choice(_ANSWER_WORDS) for _ in range(rng.randint(6, 12))]
        return " ".join(words) + ". ", "stop"
    words = []
    for _ in range(rng.randint(4, 10)):
        pool = _STYLEISH_WORDS if rng.random() < 0.35 else _CAPABILITY_WORDS
        words.append(rng.choice(pool))
    text = " ".join(words)
    if rng.random() < 0.15:
        return text + " " + marker, "stop"
    finish = "length" if rng.random() < 0.8 else "stop"
    return text + " ", finish


class ProceduralGateway:
    """In-process gateway over the procedural generator; stateless."""

    def __init__(self, seed: int = 0, marker: str = "</think>"):
        self._seed = seed
        self._marker = marker

    def complete(self, profile, request):
        from .gateway import CompletionResult, finish_reason_from_wire

        text, finish = procedural_completion(
            self._seed, profile.model_name, request.prompt, self._marker
        )
        return CompletionResult(text=text, finish_reason=finish_reason_from_wire(finish))


@dataclass
class MockServerConfig:
    mode: str = "procedural"
    seed: int = 0
    marker: str = "</think>"
    models: dict[str, Origin] = field(default_factory=dict)
    style_words: tuple[str, ...] | None = None
    default_script: dict[str, list[dict]] | None = None
    keyed_scripts: list[tuple[str, dict[str, list[dict]]]] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("procedural", "scripted"):
            raise ConfigError(f"unknown mock server mode {self.mode!r}")
        if not self.models:
            self.models = {
                "mock-student": Origin.STUDENT,
                "mock-teacher": Origin.TEACHER,
            }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MockServerConfig":
        models = {
            name: Origin(role) for name, role in data.get("models", {}).items()
        }
        keyed = [
            (item["match"], {k: item.get(k, []) for k in ("student", "teacher")})
            for item in data.get("scripts", [])
        ]
        words = data.get("style_words")
        return cls(
            mode=data.get("mode", "procedural"),
            seed=int(data.get("seed", 0)),
            marker=data.get("marker", "</think>"),
            models=models,
            style_words=tuple(words) if words is not None else None,
            default_script=data.get("default_script"),
            keyed_scripts=keyed,
        )

    @classmethod
    def from_file(cls, path) -> "MockServerConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError("mock server script file must hold a JSON object")
        return cls.from_dict(data)


def _build_script(raw: dict[str, list[dict]] | None) -> MockScript:
    raw = raw or {}
    return MockScript(student=raw.get("student", ()), teacher=raw.get("teacher", ()))


class _State:
    """Shared mutable server state guarded by a lock."""

    def __init__(self, config: MockServerConfig):
        self.config = config
        self.lock = threading.Lock()
        lexicon = (
            StyleLexicon(config.style_words)
            if config.style_words is not None else StyleLexicon.default()
        )
        self.predictor = LexiconPredictor(lexicon)
        self.default_script = _build_script(config.default_script)
        self.keyed_scripts = [
            (key, _build_script(raw)) for key, raw in config.keyed_scripts
        ]

    def reset(self) -> None:
        with self.lock:
            self.default_script.reset()
            for _, script in self.keyed_scripts:
                script.reset()

    def scripted_entry(self, role: Origin, prompt: str) -> MockEntry:
        with self.lock:
            best: MockScript | None = None
            best_len = -1
            for key, script in self.keyed_scripts:
                if key in prompt and len(key) > best_len:
                    best, best_len = script, len(key)
            script = best if best is not None else self.default_script
            return script.consume(role)


class _Handler(BaseHTTPRequestHandler):
    server_version = "TessyMock/0.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict | None:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            data = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            self._send_json(400, {"error": "request body is not valid JSON"})
            return None
        if not isinstance(data, dict):
            self._send_json(400, {"error": "request body must be a JSON object"})
            return None
        return data

    def do_GET(self):  # noqa: N802 - http.server naming
        if self.path == "/healthz":
            self._send_json(200, {"status": "ok"})
        else:
            self._send_json(404, {"error": f"unknown path {self.path}"})

    def do_POST(self):  # noqa: N802
        state: _State = self.server.state  # type: ignore[attr-defined]
        if self.path == "/reset":
            state.reset()
            self._send_json(200, {"status": "reset"})
            return
        data = self._read_json()
        if data is None:
            return
        if self.path == "/v1/completions":
            self._completions(state, data)
        elif self.path == "/v1/label":
            self._label(state, data)
        else:
            self._send_json(404, {"error": f"unknown path {self.path}"})

    def _completions(self, state: _State, data: dict) -> None:
        model = data.get("model")
        prompt = data.get("prompt")
        if not isinstance(model, str) or not isinstance(prompt, str):
            self._send_json(400, {"error": "model and prompt are required strings"})
            return
        role = state.config.models.get(model)
        if role is None:
            self._send_json(400, {"error": f"unknown model {model!r}"})
            return
        if state.config.mode == "procedural":
            text, finish = procedural_completion(
                state.config.seed, model, prompt, state.config.marker
            )
        else:
            entry = state.scripted_entry(role, prompt)
            text = entry.text
            finish = (
                entry.finish_reason.value
                if entry.finish_reason is not FinishReason.ENDPOINT_STOP
                else "content_filter"
            )
        self._send_json(200, {"choices": [{"text": text, "finish_reason": finish}]})

    def _label(self, state: _State, data: dict) -> None:
        text = data.get("text")
        target_raw = data.get("target")
        if not isinstance(text, str) or not text:
            self._send_json(400, {"error": "text must be a non-empty string"})
            return
        try:
            target = BoundaryTarget(target_raw)
        except ValueError:
            self._send_json(400, {"error": f"unknown target {target_raw!r}"})
            return
        verdict = state.predictor.predict(text, target)
        units = [
            {"start": u.start, "end": u.end, "label": u.label.value}
            for u in (verdict.units or ())
        ]
        self._send_json(200, {"keep_prefix_chars": verdict.keep_prefix_chars,
                              "units": units})


class MockFixtureServer:
    """Threaded HTTP fixture; bind to port 0 for an ephemeral port."""

    def __init__(self, config: MockServerConfig, host: str = "127.0.0.1",
                 port: int = 0):
        self._server = ThreadingHTTPServer((host, port), _Handler)
        self._server.state = _State(config)  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockFixtureServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._server.serve_forever()
