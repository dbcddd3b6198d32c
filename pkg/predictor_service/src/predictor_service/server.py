"""HTTP face: POST /v1/label and GET /healthz on a threaded server.

Request handling is stateless; the classifier is built once at startup and
only read afterwards, so concurrent requests need no locking.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .config import ServiceConfig
from .errors import ServiceConfigError
from .labeling import DEFAULT_LEXICON, TARGETS, LexiconClassifier, keep_prefix, label_text
from .model import UnigramClassifier


def build_classifier(config: ServiceConfig):
    if config.mode == "learned":
        return UnigramClassifier.load(config.model_path)
    entries = DEFAULT_LEXICON
    if config.lexicon_path:
        try:
            data = json.loads(Path(config.lexicon_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ServiceConfigError(
                f"cannot load lexicon {config.lexicon_path}: {exc}"
            ) from exc
        if (not isinstance(data, list)
                or not all(isinstance(e, str) for e in data)):
            raise ServiceConfigError(
                f"lexicon {config.lexicon_path} must be a JSON array of strings"
            )
        entries = data
    return LexiconClassifier(entries)


def label_response(classifier, text: str, target: str) -> dict:
    units = label_text(text, classifier)
    return {
        "keep_prefix_chars": keep_prefix(units, target, len(text)),
        "units": [{"start": s, "end": e, "label": label}
                  for s, e, label in units],
    }


class _Handler(BaseHTTPRequestHandler):
    classifier = None

    def log_message(self, fmt, *args):
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/healthz":
            self._send(200, {"status": "ok"})
        else:
            self._send(404, {"error": f"no route {self.path}"})

    def do_POST(self):
        if self.path != "/v1/label":
            self._send(404, {"error": f"no route {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            data = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            self._send(400, {"error": "request body is not valid JSON"})
            return
        if not isinstance(data, dict):
            self._send(400, {"error": "request body must be a JSON object"})
            return
        text = data.get("text")
        target = data.get("target")
        if not isinstance(text, str) or not text:
            self._send(400, {"error": "text must be a non-empty string"})
            return
        if target not in TARGETS:
            self._send(400, {"error": f"unknown target {target!r}"})
            return
        try:
            self._send(200, label_response(self.classifier, text, target))
        except Exception as exc:  # surface, don't hang the connection
            self._send(500, {"error": str(exc)})


class PredictorServer:
    """Owns the socket and the serving thread; bind port 0 for an ephemeral port."""

    def __init__(self, config: ServiceConfig):
        self._config = config
        classifier = build_classifier(config)
        handler = type("BoundHandler", (_Handler,), {"classifier": classifier})
        self._httpd = ThreadingHTTPServer((config.host, config.port), handler)
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "PredictorServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        daemon=True)
        self._thread.start()
        return self

    def wait(self) -> None:
        if self._thread is not None:
            self._thread.join()

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
