"""HTTP recognition service: POST /recognize, GET /health, GET /models.

Stateless JSON over stdlib http.server; one immutable recognizer shared
across threads. Request schema:

    {"traces": [[[x, y], ...], ...]}

Response: lg, latex, mathml, symbols (trace indices reference request
order), timings_ms, model_version.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .errors import InkError
from .ink import Expression, Trace


def build_expression(payload) -> Expression:
    """Validate the request body and build an Expression. Raises ValueError
    on malformed structure (mapped to 400)."""
    if not isinstance(payload, dict):
        raise ValueError("body must be a JSON object")
    traces = payload.get("traces")
    if not isinstance(traces, list):
        raise ValueError("missing or non-array 'traces' field")
    built = []
    for idx, t in enumerate(traces):
        if not isinstance(t, list) or not t:
            raise ValueError(f"trace {idx} must be a non-empty array of [x, y] points")
        for p in t:
            if (not isinstance(p, (list, tuple)) or len(p) < 2
                    or not all(isinstance(v, (int, float)) for v in p[:2])):
                raise ValueError(f"trace {idx} contains a malformed point")
            if not (np.isfinite(p[0]) and np.isfinite(p[1])):
                raise ValueError(f"trace {idx} contains a non-finite point")
        built.append(Trace(id=idx, points=[[float(p[0]), float(p[1])] for p in t]))
    return Expression(traces=tuple(built), source_id="request")


def make_handler(recognizer, version_tag: str, models_info):
    class Handler(BaseHTTPRequestHandler):
        server_version = "inkmath"

        def log_message(self, fmt, *args):
            pass  # quiet; the server is exercised heavily in tests

        def _send(self, code: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()

        def do_GET(self):
            if self.path == "/health":
                self._send(200, {"status": "ok"})
            elif self.path == "/models":
                self._send(200, {"version": version_tag, "models": models_info})
            else:
                self._send(404, {"error": f"no route {self.path}"})

        def do_POST(self):
            if self.path != "/recognize":
                self._send(404, {"error": f"no route {self.path}"})
                return
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length)
            try:
                payload = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                self._send(400, {"error": f"malformed JSON body: {exc}"})
                return
            try:
                if isinstance(payload, dict) and payload.get("traces") == []:
                    self._send(422, {"error": "empty trace list"})
                    return
                expr = build_expression(payload)
            except ValueError as exc:
                self._send(400, {"error": str(exc)})
                return
            try:
                result = recognizer(expr)
            except InkError as exc:
                self._send(500, {"error": str(exc)})
                return
            self._send(200, {
                "lg": result.lg_text(),
                "latex": result.latex,
                "mathml": result.mathml,
                "symbols": result.symbols,
                "timings_ms": result.timings_ms,
                "model_version": version_tag,
            })

    return Handler


def create_server(recognizer, host: str = "127.0.0.1", port: int = 0,
                  version_tag: str = "dev", models_info=None) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""
    handler = make_handler(recognizer, version_tag, models_info or [])
    return ThreadingHTTPServer((host, port), handler)


def start_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
