"""Completion-endpoint client plus the in-process scripted test double.

The wire protocol is a minimal completions API: POST {base_url}/v1/completions
with model/prompt/max_tokens/temperature/top_p (optional stop, echo always
false); the response's first choice carries text and finish_reason.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

import requests

from .core import PROMPT_PLACEHOLDER, EndpointProfile, Origin
from .errors import ConfigError, EndpointError, ProtocolError, TransportError

logger = logging.getLogger(__name__)


class FinishReason(str, Enum):
    LENGTH = "length"
    STOP = "stop"
    ENDPOINT_STOP = "endpoint_stop"


def finish_reason_from_wire(value: Any) -> FinishReason:
    """Map a wire finish_reason onto the enum; anything unknown is ENDPOINT_STOP."""
    if value == "length":
        return FinishReason.LENGTH
    if value == "stop":
        return FinishReason.STOP
    return FinishReason.ENDPOINT_STOP


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int
    temperature: float = 0.0
    top_p: float = 1.0
    stop: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ConfigError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ConfigError("top_p must be in (0, 1]")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    finish_reason: FinishReason


def render_prompt(profile: EndpointProfile, accumulated: str) -> str:
    """Substitute the accumulated context into the profile's template.

    Exactly one substitution happens, at the template's own placeholder;
    placeholder-looking text inside ``accumulated`` is left alone.
    """
    count = profile.prompt_template.count(PROMPT_PLACEHOLDER)
    if count != 1:
        raise ConfigError(
            f"prompt_template must contain {PROMPT_PLACEHOLDER!r} exactly once, "
            f"found {count}"
        )
    return profile.prompt_template.replace(PROMPT_PLACEHOLDER, accumulated)


class HttpGateway:
    """Thread-safe HTTP client with a global in-flight cap and retries.

    Retries (up to ``retries``, exponential backoff) apply to transport
    errors only; a non-2xx status surfaces immediately as EndpointError and
    a malformed body as ProtocolError.
    """

    def __init__(self, max_inflight: int = 32, timeout: float = 120.0,
                 retries: int = 3, backoff: float = 0.5):
        if max_inflight < 1:
            raise ConfigError("max_inflight must be >= 1")
        self._semaphore = threading.BoundedSemaphore(max_inflight)
        self._timeout = timeout
        self._retries = retries
        self._backoff = backoff
        self._local = threading.local()

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        return session

    def post_json(self, url: str, payload: Mapping[str, Any]) -> dict[str, Any]:
        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            try:
                with self._semaphore:
                    response = self._session().post(url, json=payload, timeout=self._timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
                if attempt < self._retries:
                    delay = self._backoff * (2 ** attempt)
                    logger.warning("transport error on %s (attempt %d): %s", url, attempt + 1, exc)
                    time.sleep(delay)
                continue
            if not (200 <= response.status_code < 300):
                raise EndpointError(
                    f"endpoint {url} answered {response.status_code}",
                    status=response.status_code,
                    body=response.text[:2000],
                )
            try:
                data = response.json()
            except ValueError as exc:
                raise ProtocolError(f"endpoint {url} returned non-JSON body") from exc
            if not isinstance(data, dict):
                raise ProtocolError(f"endpoint {url} returned a non-object body")
            return data
        raise TransportError(f"transport to {url} failed after {self._retries + 1} attempts") from last_error

    def complete(self, profile: EndpointProfile, request: CompletionRequest) -> CompletionResult:
        body: dict[str, Any] = {
            "model": profile.model_name,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "top_p": request.top_p,
        }
        if request.stop:
            body["stop"] = list(request.stop)
        body["echo"] = False
        url = profile.base_url.rstrip("/") + "/v1/completions"
        data = self.post_json(url, body)
        choices = data.get("choices")
        if not isinstance(choices, list) or not choices or not isinstance(choices[0], dict):
            raise ProtocolError("completion response missing choices[0]")
        first = choices[0]
        text = first.get("text")
        if not isinstance(text, str):
            raise ProtocolError("completion response missing choices[0].text")
        return CompletionResult(text=text, finish_reason=finish_reason_from_wire(first.get("finish_reason")))


@dataclass(frozen=True)
class MockEntry:
    """One scripted continuation. Default finish is a clean stop."""

    text: str
    finish_reason: FinishReason = FinishReason.STOP


def _coerce_entries(entries: Iterable[Any]) -> list[MockEntry]:
    out: list[MockEntry] = []
    for item in entries:
        if isinstance(item, MockEntry):
            out.append(item)
        elif isinstance(item, str):
            out.append(MockEntry(item))
        elif isinstance(item, tuple) and len(item) == 2:
            out.append(MockEntry(item[0], FinishReason(item[1])))
        elif isinstance(item, dict):
            out.append(MockEntry(item["text"], finish_reason_from_wire(item.get("finish_reason", "stop"))))
        else:
            raise TypeError(f"cannot build a mock entry from {item!r}")
    return out


class MockScript:
    """Per-role queues of scripted continuations.

    Each consume() pops exactly one entry for the requesting role; an
    exhausted queue yields an empty stop so callers terminate cleanly.
    """

    def __init__(self, student: Iterable[Any] = (), teacher: Iterable[Any] = ()):
        self._initial = {
            Origin.STUDENT: _coerce_entries(student),
            Origin.TEACHER: _coerce_entries(teacher),
        }
        self._cursors = {Origin.STUDENT: 0, Origin.TEACHER: 0}

    def consume(self, role: Origin) -> MockEntry:
        queue = self._initial[role]
        cursor = self._cursors[role]
        if cursor >= len(queue):
            return MockEntry("", FinishReason.STOP)
        self._cursors[role] = cursor + 1
        return queue[cursor]

    def remaining(self, role: Origin) -> int:
        return len(self._initial[role]) - self._cursors[role]

    def reset(self) -> None:
        self._cursors = {Origin.STUDENT: 0, Origin.TEACHER: 0}

    def copy(self) -> "MockScript":
        fresh = MockScript()
        fresh._initial = {k: list(v) for k, v in self._initial.items()}
        return fresh


@dataclass
class LoggedRequest:
    model_name: str
    prompt: str
    max_tokens: int


class MockGateway:
    """In-process stand-in for HttpGateway, driven by MockScript queues.

    Routing: the profile's model name maps to a role; when ``scripts_by_key``
    is given, the script whose key occurs in the request prompt is used
    (longest key wins), otherwise the single default script.
    """

    def __init__(self, script: MockScript | None = None, *,
                 model_roles: Mapping[str, Origin],
                 scripts_by_key: Mapping[str, MockScript] | None = None,
                 fail_keys: Sequence[str] = ()):
        self._script = script
        self._scripts_by_key = dict(scripts_by_key or {})
        self._model_roles = dict(model_roles)
        self._fail_keys = tuple(fail_keys)
        self._lock = threading.Lock()
        self.requests: list[LoggedRequest] = []

    def _select_script(self, prompt: str) -> MockScript:
        best: MockScript | None = None
        best_len = -1
        for key, script in self._scripts_by_key.items():
            if key in prompt and len(key) > best_len:
                best, best_len = script, len(key)
        if best is not None:
            return best
        if self._script is None:
            raise EndpointError("no script matches the request prompt", status=400)
        return self._script

    def complete(self, profile: EndpointProfile, request: CompletionRequest) -> CompletionResult:
        role = self._model_roles.get(profile.model_name)
        if role is None:
            raise EndpointError(f"unknown model {profile.model_name!r}", status=400)
        with self._lock:
            self.requests.append(LoggedRequest(profile.model_name, request.prompt, request.max_tokens))
            for key in self._fail_keys:
                if key in request.prompt:
                    raise TransportError(f"scripted failure for key {key!r}")
            entry = self._select_script(request.prompt).consume(role)
        return CompletionResult(text=entry.text, finish_reason=entry.finish_reason)

    def reset(self) -> None:
        with self._lock:
            if self._script is not None:
                self._script.reset()
            for script in self._scripts_by_key.values():
                script.reset()
            self.requests.clear()
