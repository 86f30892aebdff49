"""HTTP facade over analysis sessions, mirroring the library 1:1.

The facade is what browser consoles and scripts talk to; it owns a session
registry and forwards estimation work to the configured statistics server.
No endpoint exposes anything the library cannot do.
"""

from __future__ import annotations

import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Optional

from .errors import MetadataParseError, MetadataValidationError, VidexError
from .optimizer import PlanningError
from .sql_frontend import SqlError
from .stat_server import (
    ApiError,
    DEFAULT_MAX_BODY_BYTES,
    StatsConnectError,
    canonical_json_bytes,
)
from .whatif import Session, WhatifError, create_session, diff_plans

_SESSION_RE = re.compile(r"^/v1/sessions/([^/]+)$")
_EXPLAIN_RE = re.compile(r"^/v1/sessions/([^/]+)/explain$")
_VINDEX_RE = re.compile(r"^/v1/sessions/([^/]+)/virtual-indexes$")
_VINDEX_NAME_RE = re.compile(r"^/v1/sessions/([^/]+)/virtual-indexes/([^/]+)$")


class SessionManager:
    """Registry of live sessions, keyed by generated session ids."""

    def __init__(self, stats_url: str):
        self.stats_url = stats_url
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def create(self, metadata_doc: Any, model: str) -> Session:
        with self._lock:
            self._counter += 1
            session_id = f"s-{self._counter:06d}"
        session = create_session(metadata_doc, model, self.stats_url,
                                 session_id=session_id)
        with self._lock:
            self.sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise ApiError("UNKNOWN_SESSION", f"no session {session_id!r}",
                           "$.session_id", status=404)
        return session


class _FacadeHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "videx-api"

    def log_message(self, *args):
        pass

    @property
    def manager(self) -> SessionManager:
        return self.server.manager

    def _read_body(self) -> Any:
        import json
        length = int(self.headers.get("Content-Length", 0))
        if length > self.server.max_body_bytes:
            raise ApiError("BODY_TOO_LARGE",
                           f"body of {length} bytes exceeds limit "
                           f"{self.server.max_body_bytes}", status=413)
        raw = self.rfile.read(length)
        try:
            return json.loads(raw) if raw else None
        except json.JSONDecodeError as exc:
            raise ApiError("PARSE_ERROR", f"invalid JSON: {exc}") from exc

    def _send(self, status: int, body: dict) -> None:
        data = canonical_json_bytes(body)
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, fn) -> None:
        try:
            status, body = fn()
            self._send(status, body)
        except ApiError as exc:
            self._send(exc.status, exc.body())
        except MetadataParseError as exc:
            self._send(400, {"code": "PARSE_ERROR", "message": exc.reason,
                             "path": exc.path})
        except MetadataValidationError as exc:
            self._send(400, {"code": "VALIDATION", "message": str(exc),
                             "path": "$"})
        except SqlError as exc:
            self._send(400, {"code": "SQL_ERROR", "message": str(exc),
                             "path": "$.sql"})
        except (PlanningError, StatsConnectError) as exc:
            self._send(502, {"code": "UPSTREAM_ERROR", "message": str(exc),
                             "path": "$"})
        except WhatifError as exc:
            self._send(400, {"code": "WHATIF_ERROR", "message": str(exc),
                             "path": "$"})
        except VidexError as exc:
            self._send(400, {"code": "ERROR", "message": str(exc), "path": "$"})

    def do_POST(self):
        def run():
            body = self._read_body()
            if self.path == "/v1/sessions":
                payload = _require(body, dict, "$")
                metadata = payload.get("metadata")
                if metadata is None:
                    raise ApiError("BAD_REQUEST", "missing metadata document",
                                   "$.metadata")
                model = payload.get("model", "independence")
                session = self.manager.create(metadata, model)
                return 200, session.describe()
            m = _EXPLAIN_RE.match(self.path)
            if m:
                session = self.manager.get(m.group(1))
                payload = _require(body, dict, "$")
                sql = payload.get("sql")
                if not isinstance(sql, str):
                    raise ApiError("BAD_REQUEST", "sql must be a string", "$.sql")
                return 200, session.explain_sql(sql).to_doc()
            m = _VINDEX_RE.match(self.path)
            if m:
                session = self.manager.get(m.group(1))
                payload = _require(body, dict, "$")
                table = payload.get("table")
                columns = payload.get("columns")
                if not isinstance(table, str):
                    raise ApiError("BAD_REQUEST", "table must be a string",
                                   "$.table")
                if not isinstance(columns, list) or not columns:
                    raise ApiError("BAD_REQUEST",
                                   "columns must be a non-empty array",
                                   "$.columns")
                vindex = session.add_virtual_index(
                    table, columns, unique=bool(payload.get("unique", False)),
                    name=payload.get("name"))
                return 200, {"name": vindex.name, "table": vindex.table,
                             "columns": list(vindex.columns),
                             "unique": vindex.unique, "origin": "virtual"}
            if self.path == "/v1/diff":
                payload = _require(body, dict, "$")
                a, b = payload.get("a"), payload.get("b")
                if not isinstance(a, dict) or not isinstance(b, dict):
                    raise ApiError("BAD_REQUEST",
                                   "a and b must be EXPLAIN documents", "$")
                return 200, diff_plans(a, b).to_doc()
            raise ApiError("NOT_FOUND", f"no such endpoint {self.path}",
                           status=404)
        self._dispatch(run)

    def do_GET(self):
        def run():
            m = _SESSION_RE.match(self.path)
            if m:
                return 200, self.manager.get(m.group(1)).describe()
            if self.path == "/v1/health":
                return 200, {"status": "ok",
                             "sessions": sorted(self.manager.sessions)}
            raise ApiError("NOT_FOUND", f"no such endpoint {self.path}",
                           status=404)
        self._dispatch(run)

    def do_DELETE(self):
        def run():
            m = _VINDEX_NAME_RE.match(self.path)
            if m:
                session = self.manager.get(m.group(1))
                return 200, session.drop_virtual_index(m.group(2))
            raise ApiError("NOT_FOUND", f"no such endpoint {self.path}",
                           status=404)
        self._dispatch(run)


def _require(value: Any, typ: type, path: str):
    if not isinstance(value, typ):
        raise ApiError("BAD_REQUEST", f"expected {typ.__name__} body", path)
    return value


class FacadeServer:
    """Threaded HTTP front for a SessionManager."""

    def __init__(self, stats_url: str, host: str = "127.0.0.1", port: int = 0,
                 max_body_bytes: int = DEFAULT_MAX_BODY_BYTES,
                 manager: Optional[SessionManager] = None):
        self.manager = manager or SessionManager(stats_url)
        self._httpd = ThreadingHTTPServer((host, port), _FacadeHandler)
        self._httpd.daemon_threads = True
        self._httpd.manager = self.manager
        self._httpd.max_body_bytes = max_body_bytes
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self._httpd.server_address[0]}:{self.port}"

    def start(self) -> "FacadeServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "FacadeServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
