"""Serve synthesized HTTP responses from a mock skeleton.

Each request is converted to the skeleton's input feature vector
(including state features computed from the per-resource history of
previously served requests), every predicted target is classified, and
the predictions are assembled into a status code, headers, and a JSON
body.  ``/_mock/*`` control endpoints expose reset, counters, and the
active skeleton text.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import MockskelError
from .features import (
    SENTINEL_NO_EXIST,
    TransactionSummary,
    serve_input_values,
    unescape_literal,
)
from .learners import classify
from .skeleton import PLACEHOLDER, MockSkeleton
from .traffic import HttpRequest, crud_class, path_shape, resource_key

log = logging.getLogger(__name__)


@dataclass
class SynthesizedResponse:
    status_code: int
    headers: tuple[tuple[str, str], ...]
    body: bytes | None


@dataclass
class ServeState:
    """Per-resource history of served transactions plus counters."""

    per_resource: dict[str, list[TransactionSummary]] = field(default_factory=dict)
    requests_served: int = 0
    unmatched_features: int = 0

    def history(self, key: str) -> list[TransactionSummary]:
        return self.per_resource.get(key, [])

    def append(self, key: str, summary: TransactionSummary) -> None:
        self.per_resource.setdefault(key, []).append(summary)

    def reset(self) -> None:
        """Clear all histories; counters are preserved."""
        self.per_resource.clear()


def _json_value(nominal: str):
    """Interpret a nominal prediction as a JSON value."""
    text = unescape_literal(nominal)
    if text == "null":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _unflatten(values: dict[str, object], array_paths: tuple[str, ...]) -> object:
    root: dict = {}
    for path, value in values.items():
        parts = path.split(".")
        node = root
        ok = True
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                ok = False  # scalar and object predictions collide on this path
                break
        if ok:
            node[parts[-1]] = value
    # merged arrays re-materialize as single-element arrays, deepest first
    relative = sorted(
        (p.split(":", 1)[1] for p in array_paths if p.startswith("responsejson:")),
        key=lambda p: -p.count("."),
    )
    for path in relative:
        parts = path.split(".")
        node = root
        for part in parts[:-1]:
            node = node.get(part) if isinstance(node, dict) else None
            if node is None:
                break
        if isinstance(node, dict) and parts[-1] in node:
            node[parts[-1]] = [node[parts[-1]]]
    return root


def synthesize_response(
    skeleton: MockSkeleton, request: HttpRequest, state: ServeState
) -> SynthesizedResponse:
    """Classify every predicted target for one request and assemble the
    response; the served transaction is appended to the state."""
    key = resource_key(request, skeleton.config.resource)
    history = state.history(key)
    values, unmatched = serve_input_values(
        skeleton.inputs, request, history, skeleton.config,
        also_known=skeleton.dropped_inputs,
    )
    state.unmatched_features += unmatched
    state.requests_served += 1

    predictions = {
        name: classify(entry.model, values) for name, entry in skeleton.targets.items()
    }
    defaults = {
        item.attribute: item.default
        for item in skeleton.unpredicted
        if item.default != PLACEHOLDER
    }

    status = 200
    status_nominal = predictions.get("statusCode", defaults.get("statusCode"))
    if status_nominal is not None:
        try:
            status = int(unescape_literal(status_nominal))
        except ValueError:
            log.warning("statusCode prediction %r is not numeric, serving 200", status_nominal)

    headers: list[tuple[str, str]] = []
    body_values: dict[str, object] = {}
    for source in (defaults, predictions):
        for name, nominal in source.items():
            if nominal is None or nominal == SENTINEL_NO_EXIST:
                continue
            if name.startswith("responseheader:"):
                headers.append((name.split(":", 1)[1], unescape_literal(nominal)))
            elif name.startswith("responsejson:"):
                body_values[name.split(":", 1)[1]] = _json_value(nominal)
    # predictions override defaults for the same header name
    deduped: dict[str, str] = {}
    for name, value in headers:
        deduped[name] = value

    body: bytes | None = None
    if body_values:
        obj = _unflatten(body_values, skeleton.profile.array_paths)
        body = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
        if not any(n.lower() == "content-type" for n in deduped):
            deduped["Content-Type"] = "application/json"

    summary = TransactionSummary(
        method=request.method,
        status_code=status,
        crud=crud_class(request, skeleton.config.resource),
    )
    state.append(key, summary)
    return SynthesizedResponse(
        status_code=status, headers=tuple(deduped.items()), body=body
    )


class MockService:
    """Thread-safe skeleton server core (usable without HTTP).

    Histories of distinct resources evolve independently; requests for
    one resource are serialized so state features see a consistent
    ordering.
    """

    def __init__(self, skeleton: MockSkeleton, strict: bool = False):
        self.skeleton = skeleton
        self.strict = strict
        self.state = ServeState()
        self._master = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self._shapes = set(skeleton.profile.shapes)

    def _lock_for(self, key: str) -> threading.Lock:
        with self._master:
            return self._locks.setdefault(key, threading.Lock())

    def handle(
        self,
        method: str,
        uri: str,
        headers=(),
        body: bytes | None = None,
    ) -> SynthesizedResponse:
        try:
            request = HttpRequest(method=method, uri=uri, headers=headers, body=body)
        except (ValueError, MockskelError):
            return SynthesizedResponse(status_code=501, headers=(), body=None)
        if self.strict and path_shape(request, self.skeleton.config.resource) not in self._shapes:
            with self._master:
                self.state.requests_served += 1
            return SynthesizedResponse(status_code=501, headers=(), body=None)
        key = resource_key(request, self.skeleton.config.resource)
        with self._lock_for(key):
            return synthesize_response(self.skeleton, request, self.state)

    def handle_request(self, request: HttpRequest) -> SynthesizedResponse:
        return self.handle(request.method, request.uri, request.headers, request.body)

    def reset(self) -> None:
        with self._master:
            self.state.reset()

    def stats(self) -> dict:
        with self._master:
            return {
                "requests": self.state.requests_served,
                "unmatchedFeatures": self.state.unmatched_features,
                "resources": len(self.state.per_resource),
            }


def make_handler(service: MockService, skeleton_text: str):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route through logging, not stderr
            log.debug(fmt, *args)

        def _read_body(self) -> bytes | None:
            length = int(self.headers.get("Content-Length") or 0)
            return self.rfile.read(length) if length else None

        def _send(self, status: int, headers, body: bytes | None) -> None:
            self.send_response(status)
            for name, value in headers:
                self.send_header(name, value)
            self.send_header("Content-Length", str(len(body) if body else 0))
            self.end_headers()
            if body:
                self.wfile.write(body)

        def _control(self) -> None:
            if self.path == "/_mock/reset" and self.command == "POST":
                service.reset()
                self._send(200, [("Content-Type", "application/json")], b'{"reset":true}')
            elif self.path == "/_mock/stats" and self.command == "GET":
                payload = json.dumps(service.stats()).encode()
                self._send(200, [("Content-Type", "application/json")], payload)
            elif self.path == "/_mock/skeleton" and self.command == "GET":
                self._send(
                    200,
                    [("Content-Type", "text/plain; charset=utf-8")],
                    skeleton_text.encode("utf-8"),
                )
            else:
                self._send(404, [], None)

        def _handle(self) -> None:
            body = self._read_body()
            if self.path.startswith("/_mock/"):
                self._control()
                return
            host = self.headers.get("Host") or "localhost"
            uri = f"http://{host}{self.path}"
            response = service.handle(
                self.command, uri, list(self.headers.items()), body
            )
            log.info("%s %s -> %d", self.command, self.path, response.status_code)
            self._send(response.status_code, response.headers, response.body)

        do_GET = do_HEAD = do_POST = do_PUT = do_PATCH = do_DELETE = do_OPTIONS = _handle

    return Handler


def serve_skeleton(
    skeleton: MockSkeleton,
    port: int = 8080,
    strict: bool = False,
    skeleton_text: str = "",
) -> ThreadingHTTPServer:
    """Bind a threading HTTP server for a skeleton (caller runs serve_forever)."""
    service = MockService(skeleton, strict=strict)
    if not skeleton_text:
        from .skeleton import emit_skeleton

        skeleton_text = emit_skeleton(skeleton)
    handler = make_handler(service, skeleton_text)
    server = ThreadingHTTPServer(("127.0.0.1", port), handler)
    server.mock_service = service  # type: ignore[attr-defined]
    return server
