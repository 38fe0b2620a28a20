"""Live state service for the operator console.

Endpoints (all JSON, CORS-open, schema version 1):

    GET  /snapshot            latest tick-consistent state snapshot
    GET  /events?since=N      server-sent events; resumes without gaps
    POST /utterance           {"speaker": ..., "text": ...}  (interactive runs)
    POST /control             {"action": "pause"|"resume"|"step"}
    GET  /<static>            console assets, when a static root is configured

Events are buffered for the run's lifetime, so `since=0` always replays
the full history; each SSE frame carries its sequence number as the SSE
id, which browsers echo back via Last-Event-ID on reconnect.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .harness import GatewayEvent, RunController, RunState

SCHEMA_VERSION = 1


class EventBuffer:
    """Append-only event store with blocking reads past the write head."""

    def __init__(self):
        self._events: list[GatewayEvent] = []
        self._cond = threading.Condition()
        self._closed = False

    def append(self, event: GatewayEvent) -> None:
        with self._cond:
            self._events.append(event)
            self._cond.notify_all()

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        with self._cond:
            return self._closed

    def read_from(self, start: int, timeout: float = 0.25) -> tuple[list[GatewayEvent], bool]:
        """Events with seq >= start; blocks briefly when none are pending.
        Returns (events, closed-and-drained)."""
        with self._cond:
            pending = [e for e in self._events if e.seq >= start]
            if pending:
                return pending, False
            if self._closed:
                return [], True
            self._cond.wait(timeout)
            pending = [e for e in self._events if e.seq >= start]
            return pending, self._closed and not pending

    def all_events(self) -> list[GatewayEvent]:
        with self._cond:
            return list(self._events)


class Gateway:
    """Holds the live surfaces the HTTP layer reads and writes."""

    def __init__(self, state: RunState, controller: Optional[RunController] = None,
                 interactive: bool = False, static_root: Optional[Path] = None):
        self.state = state
        self.controller = controller
        self.interactive = interactive
        self.static_root = static_root
        self.events = EventBuffer()
        self._snapshot_json = json.dumps({"schema": SCHEMA_VERSION, "tick": -1,
                                          "pending": True}, sort_keys=True)
        self._lock = threading.Lock()

    # -- harness-side hooks -------------------------------------------------------

    def on_event(self, event: GatewayEvent) -> None:
        self.events.append(event)

    def publish_snapshot(self) -> None:
        snapshot = self.state.snapshot()
        with self._lock:
            self._snapshot_json = json.dumps(snapshot, sort_keys=True)

    def finish(self) -> None:
        self.publish_snapshot()
        self.events.close()

    # -- request-side accessors -------------------------------------------------------

    def snapshot_json(self) -> str:
        with self._lock:
            return self._snapshot_json

    def submit_utterance(self, speaker: str, text: str) -> tuple[bool, str]:
        if not self.interactive:
            return False, "run is scripted; utterance intake is disabled"
        if not text or not text.strip():
            return False, "empty utterance"
        self.state.submit_utterance(speaker, text)
        return True, "queued"

    def control(self, action: str) -> tuple[bool, str]:
        if self.controller is None:
            return False, "no controller attached"
        if action not in ("pause", "resume", "step"):
            return False, f"unknown action {action!r}"
        self.controller.control(action)
        return True, action


class GatewayHandler(BaseHTTPRequestHandler):
    gateway: Gateway = None  # set by serve()
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet
        pass

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID")

    def _json(self, code: int, payload: dict | str) -> None:
        body = payload if isinstance(payload, str) else json.dumps(payload, sort_keys=True)
        data = body.encode()
        self.send_response(code)
        self._cors()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/snapshot":
            self._json(200, self.gateway.snapshot_json())
        elif url.path == "/events":
            self._stream(url)
        elif self.gateway.static_root is not None:
            self._static(url.path)
        else:
            self._json(404, {"error": "not found"})

    def _stream(self, url) -> None:
        query = parse_qs(url.query)
        since = 0
        if "since" in query:
            try:
                since = int(query["since"][0])
            except ValueError:
                since = 0
        header_id = self.headers.get("Last-Event-ID")
        if header_id is not None:
            try:
                since = int(header_id) + 1
            except ValueError:
                pass
        kind_filter = query.get("kind", [None])[0]
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.end_headers()
        cursor = since
        try:
            while True:
                events, drained = self.gateway.events.read_from(cursor)
                for event in events:
                    cursor = event.seq + 1
                    if kind_filter and event.kind != kind_filter:
                        continue
                    frame = f"id: {event.seq}\ndata: {event.line()}\n\n"
                    self.wfile.write(frame.encode())
                if events:
                    self.wfile.flush()
                if drained:
                    self.wfile.write(b"event: end\ndata: {}\n\n")
                    self.wfile.flush()
                    break
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _static(self, path: str) -> None:
        root = self.gateway.static_root.resolve()
        name = path.lstrip("/") or "index.html"
        target = (root / name).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            self._json(404, {"error": "not found"})
            return
        data = target.read_bytes()
        ctype = {"html": "text/html", "js": "text/javascript", "css": "text/css",
                 "map": "application/json"}.get(target.suffix.lstrip("."),
                                                "application/octet-stream")
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        url = urlparse(self.path)
        length = int(self.headers.get("Content-Length", 0))
        try:
            payload = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self._json(400, {"error": "invalid json"})
            return
        if url.path == "/utterance":
            ok, why = self.gateway.submit_utterance(payload.get("speaker", ""),
                                                    payload.get("text", ""))
            self._json(200 if ok else 409, {"ok": ok, "detail": why})
        elif url.path == "/control":
            ok, why = self.gateway.control(payload.get("action", ""))
            self._json(200 if ok else 400, {"ok": ok, "detail": why})
        else:
            self._json(404, {"error": "not found"})


class GatewayServer:
    def __init__(self, gateway: Gateway, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundHandler", (GatewayHandler,), {"gateway": gateway})
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.gateway = gateway
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        name="gateway", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=2)


def serve(state: RunState, controller: Optional[RunController] = None,
          interactive: bool = False, host: str = "127.0.0.1", port: int = 0,
          static_root: Optional[Path] = None) -> GatewayServer:
    gateway = Gateway(state, controller, interactive, static_root)
    server = GatewayServer(gateway, host, port)
    server.start()
    return server
