"""Disaggregated statistics service: per-task snapshots, estimation over
HTTP, response caching, and task-affinity routing.

The service is a plain object (StatService) so tests and embedders can call
it directly; serve() wraps it in a threaded stdlib HTTP server speaking
canonical JSON. One task = one loaded snapshot + one estimation model;
snapshots are immutable, so the response cache never needs invalidating
within a task and is dropped wholesale on replace.

Model instances are cached by (model name, snapshot content digest):
loading the same statistics twice -- even under different task ids --
constructs the model once.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Optional, Sequence
from urllib.parse import parse_qs, urlparse

import httpx

from .catalog import (
    CatalogSnapshot,
    snapshot_digest,
    snapshot_from_doc,
    validate_snapshot,
)
from .errors import MetadataParseError, VidexError
from .estimator import (
    EstimationError,
    EstimatorModel,
    UnknownModelError,
    create_model,
    registered_models,
)
from .sql_frontend import RangeCond


class ApiError(VidexError):
    """Service-level failure with a wire-ready {code, message, path} body."""

    def __init__(self, code: str, message: str, path: str = "$", status: int = 400):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.path = path
        self.status = status
        self.message = message

    def body(self) -> dict:
        return {"code": self.code, "message": self.message, "path": self.path}


class _RWLock:
    """Many readers or one writer; load/replace excludes in-flight requests."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writing = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writing:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writing or self._readers:
                self._cond.wait()
            self._writing = True
        try:
            yield
        finally:
            with self._cond:
                self._writing = False
                self._cond.notify_all()


@dataclass
class TaskContext:
    """Everything one analysis task needs: snapshot, model, log, cache."""

    task_id: str
    snapshot: CatalogSnapshot
    digest: str
    model_name: str
    model: EstimatorModel
    request_log: list = field(default_factory=list)
    cache: dict = field(default_factory=dict)
    lock: _RWLock = field(default_factory=_RWLock)


class StatService:
    """In-process core of the statistics server; thread-safe."""

    def __init__(self, cache_enabled: bool = True):
        self.tasks: dict[str, TaskContext] = {}
        self.cache_enabled = cache_enabled
        self._model_cache: dict[tuple, EstimatorModel] = {}
        self.model_constructions = 0
        self.cache_hits = 0
        self.cache_misses = 0
        self._lock = threading.Lock()

    # -- task lifecycle ----------------------------------------------------
    def load_task_stats(self, task_id: str, document: Any, model_name: str,
                        replace: bool = False) -> dict:
        """Create or idempotently re-ack a task from a metadata document."""
        snapshot = self._parse_document(document)
        digest = snapshot_digest(snapshot)
        if model_name not in registered_models():
            raise ApiError("UNKNOWN_MODEL",
                           f"unknown model {model_name!r}; registered: "
                           f"{', '.join(registered_models())}")
        with self._lock:
            existing = self.tasks.get(task_id)
            if existing is not None:
                if existing.digest == digest and existing.model_name == model_name \
                        and not replace:
                    return self._ack(existing, already_loaded=True, reused_model=True)
                if not replace:
                    raise ApiError(
                        "VERSION_CONFLICT",
                        f"task {task_id!r} already loaded with different content "
                        "or model; pass replace=true to overwrite", status=409)
            model, reused = self._model_for(model_name, digest, snapshot)
            context = TaskContext(task_id=task_id, snapshot=snapshot, digest=digest,
                                  model_name=model_name, model=model)
            if existing is not None:
                with existing.lock.write():
                    self.tasks[task_id] = context
            else:
                self.tasks[task_id] = context
            return self._ack(context, already_loaded=False, reused_model=reused)

    def _parse_document(self, document: Any) -> CatalogSnapshot:
        try:
            if isinstance(document, (bytes, str)):
                document = json.loads(document)
            snapshot = snapshot_from_doc(document)
        except json.JSONDecodeError as exc:
            raise ApiError("PARSE_ERROR", f"invalid JSON: {exc}") from exc
        except MetadataParseError as exc:
            raise ApiError("PARSE_ERROR", exc.reason, path=exc.path) from exc
        violations = validate_snapshot(snapshot)
        if violations:
            detail = "; ".join(f"{v.path}: {v.rule}" for v in violations)
            raise ApiError("VALIDATION", f"{len(violations)} violation(s): {detail}")
        return snapshot

    def _model_for(self, model_name: str, digest: str,
                   snapshot: CatalogSnapshot) -> tuple[EstimatorModel, bool]:
        key = (model_name, digest)
        if key in self._model_cache:
            return self._model_cache[key], True
        try:
            model = create_model(model_name, snapshot)
        except UnknownModelError as exc:
            raise ApiError("UNKNOWN_MODEL", str(exc)) from exc
        except EstimationError as exc:
            raise ApiError("MODEL_ERROR", str(exc)) from exc
        self.model_constructions += 1
        self._model_cache[key] = model
        return model, False

    @staticmethod
    def _ack(context: TaskContext, already_loaded: bool, reused_model: bool) -> dict:
        return {
            "task_id": context.task_id,
            "tables_loaded": sorted(context.snapshot.tables),
            "model": context.model_name,
            "already_loaded": already_loaded,
            "reused_model": reused_model,
        }

    def unload_task(self, task_id: str) -> None:
        with self._lock:
            self.tasks.pop(task_id, None)

    def _task(self, task_id: Any) -> TaskContext:
        if not isinstance(task_id, str):
            raise ApiError("BAD_REQUEST", "task_id must be a string", "$.task_id")
        with self._lock:
            task = self.tasks.get(task_id)
        if task is None:
            raise ApiError("UNKNOWN_TASK", f"task {task_id!r} not loaded",
                           "$.task_id", status=404)
        return task

    # -- estimation endpoints ------------------------------------------------
    def handle_cardinality(self, payload: Any) -> dict:
        payload = _require_object(payload)
        task = self._task(payload.get("task_id"))
        table = payload.get("table")
        if not isinstance(table, str):
            raise ApiError("BAD_REQUEST", "table must be a string", "$.table")
        raw_conds = payload.get("conditions")
        if not isinstance(raw_conds, list):
            raise ApiError("BAD_REQUEST", "conditions must be an array",
                           "$.conditions")
        conds = []
        for i, obj in enumerate(raw_conds):
            try:
                conds.append(RangeCond.from_wire(obj, f"$.conditions[{i}]"))
            except MetadataParseError as exc:
                raise ApiError("BAD_REQUEST", exc.reason, exc.path) from exc
        key = _cardinality_key(table, conds)
        return self._answer(task, key, payload_kind="cardinality",
                            log_entry={"op": "cardinality", "table": table,
                                       "conditions": [c.to_wire() for c in conds]},
                            compute=lambda: self._compute_cardinality(task, table,
                                                                      conds))

    def _compute_cardinality(self, task: TaskContext, table: str,
                             conds: Sequence[RangeCond]) -> dict:
        try:
            est = task.model.cardinality(table, conds)
        except EstimationError as exc:
            raise ApiError("ESTIMATION_ERROR", str(exc)) from exc
        return {"rows": est.rows, "degraded": est.degraded}

    def handle_ndv(self, payload: Any) -> dict:
        payload = _require_object(payload)
        task = self._task(payload.get("task_id"))
        table = payload.get("table")
        if not isinstance(table, str):
            raise ApiError("BAD_REQUEST", "table must be a string", "$.table")
        columns = payload.get("columns")
        if not isinstance(columns, list) or not columns \
                or not all(isinstance(c, str) for c in columns):
            raise ApiError("BAD_REQUEST", "columns must be a non-empty string array",
                           "$.columns")
        # column order is part of the key, by contract
        key = json.dumps(["ndv", table, columns])
        return self._answer(task, key, payload_kind="ndv",
                            log_entry={"op": "ndv", "table": table,
                                       "columns": list(columns)},
                            compute=lambda: self._compute_ndv(task, table, columns))

    def _compute_ndv(self, task: TaskContext, table: str,
                     columns: Sequence[str]) -> dict:
        try:
            est = task.model.ndv(table, columns)
        except EstimationError as exc:
            raise ApiError("ESTIMATION_ERROR", str(exc)) from exc
        return {"ndv": est.ndv}

    def _answer(self, task: TaskContext, key: str, payload_kind: str,
                log_entry: dict, compute) -> dict:
        with task.lock.read():
            cached = self.cache_enabled and key in task.cache
            if cached:
                body = dict(task.cache[key])
                with self._lock:
                    self.cache_hits += 1
            else:
                body = compute()
                with self._lock:
                    self.cache_misses += 1
                if self.cache_enabled:
                    task.cache[key] = dict(body)
            entry = dict(log_entry)
            entry["cached"] = cached
            task.request_log.append(entry)
        body["cached"] = cached
        return body

    # -- introspection -------------------------------------------------------
    def task_log(self, task_id: str) -> dict:
        task = self._task(task_id)
        with task.lock.read():
            return {"task_id": task_id, "requests": [dict(e) for e in task.request_log]}

    def health(self) -> dict:
        with self._lock:
            return {
                "status": "ok",
                "tasks": sorted(self.tasks),
                "cache": {"hits": self.cache_hits, "misses": self.cache_misses},
            }


def _require_object(payload: Any) -> dict:
    if not isinstance(payload, dict):
        raise ApiError("BAD_REQUEST", "request body must be a JSON object", "$")
    return payload


def _cardinality_key(table: str, conds: Sequence[RangeCond]) -> str:
    """Canonical cache key: condition order never matters."""
    wires = sorted((json.dumps(c.to_wire(), sort_keys=True) for c in conds))
    return json.dumps(["cardinality", table, wires])


# --------------------------------------------------------------------------
# task routing

@dataclass(frozen=True)
class InstanceDescriptor:
    instance_id: str
    loaded_tasks: frozenset[str] = frozenset()


class RoutingError(VidexError):
    pass


def route_task(task_id: str,
               instances: Sequence[InstanceDescriptor]) -> str:
    """Pick the serving instance for a task, deterministically.

    An instance that already holds the task always wins (lowest id on
    ties); otherwise rendezvous hashing, so removing a non-owning instance
    never reroutes other tasks.
    """
    if not instances:
        raise RoutingError("no instances available")
    owners = sorted(i.instance_id for i in instances if task_id in i.loaded_tasks)
    if owners:
        return owners[0]
    best_id: Optional[str] = None
    best_score: Optional[int] = None
    for inst in instances:
        digest = hashlib.sha256(
            f"{task_id}|{inst.instance_id}".encode()).hexdigest()
        score = int(digest, 16)
        if best_score is None or score > best_score \
                or (score == best_score and inst.instance_id < best_id):
            best_id, best_score = inst.instance_id, score
    return best_id


# --------------------------------------------------------------------------
# HTTP layer

DEFAULT_MAX_BODY_BYTES = 64 * 1024 * 1024

_TASK_STATS_RE = re.compile(r"^/v1/tasks/([^/]+)/stats$")
_TASK_LOG_RE = re.compile(r"^/v1/tasks/([^/]+)/log$")


def canonical_json_bytes(body: dict) -> bytes:
    return json.dumps(body, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode()


class _StatsHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "videx-stats"

    def log_message(self, *args):  # quiet by default
        pass

    @property
    def service(self) -> StatService:
        return self.server.service

    def _read_body(self) -> Any:
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

    def do_POST(self):
        try:
            url = urlparse(self.path)
            m = _TASK_STATS_RE.match(url.path)
            if m:
                params = parse_qs(url.query)
                model = params.get("model", ["independence"])[0]
                replace = params.get("replace", ["false"])[0].lower() == "true"
                body = self._read_body()
                self._send(200, self.service.load_task_stats(
                    m.group(1), body, model, replace=replace))
            elif url.path == "/v1/cardinality":
                self._send(200, self.service.handle_cardinality(self._read_body()))
            elif url.path == "/v1/ndv":
                self._send(200, self.service.handle_ndv(self._read_body()))
            else:
                raise ApiError("NOT_FOUND", f"no such endpoint {url.path}",
                               status=404)
        except ApiError as exc:
            self._send(exc.status, exc.body())

    def do_GET(self):
        try:
            url = urlparse(self.path)
            m = _TASK_LOG_RE.match(url.path)
            if m:
                self._send(200, self.service.task_log(m.group(1)))
            elif url.path == "/v1/health":
                self._send(200, self.service.health())
            else:
                raise ApiError("NOT_FOUND", f"no such endpoint {url.path}",
                               status=404)
        except ApiError as exc:
            self._send(exc.status, exc.body())


class StatsServer:
    """Threaded HTTP front for a StatService; port 0 picks an ephemeral port."""

    def __init__(self, service: Optional[StatService] = None, host: str = "127.0.0.1",
                 port: int = 0, max_body_bytes: int = DEFAULT_MAX_BODY_BYTES):
        self.service = service or StatService()
        self._httpd = ThreadingHTTPServer((host, port), _StatsHandler)
        self._httpd.daemon_threads = True
        self._httpd.service = self.service
        self._httpd.max_body_bytes = max_body_bytes
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        host = self._httpd.server_address[0]
        return f"http://{host}:{self.port}"

    def start(self) -> "StatsServer":
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

    def __enter__(self) -> "StatsServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


# --------------------------------------------------------------------------
# wire client

class StatsRequestError(VidexError):
    """Error response from the statistics server."""

    def __init__(self, status: int, body: dict, request: dict):
        self.status = status
        self.error_body = body
        self.request = request
        super().__init__(
            f"{body.get('code', 'ERROR')} ({status}): {body.get('message', '')}")


class StatsConnectError(VidexError):
    def __init__(self, endpoint: str, cause: Exception):
        super().__init__(f"cannot reach statistics server at {endpoint}: {cause}")
        self.endpoint = endpoint


class StatsClient:
    """HTTP client for the statistics protocol."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self._http = httpx.Client(base_url=self.base_url, timeout=timeout)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "StatsClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _request(self, method: str, path: str, request_doc: dict,
                 **kwargs) -> dict:
        try:
            response = self._http.request(method, path, **kwargs)
        except httpx.HTTPError as exc:
            raise StatsConnectError(self.base_url, exc) from exc
        try:
            body = response.json()
        except ValueError:
            body = {"code": "BAD_RESPONSE", "message": response.text[:200]}
        if response.status_code != 200:
            raise StatsRequestError(response.status_code, body, request_doc)
        return body

    def load_task(self, task_id: str, document: Any, model: str,
                  replace: bool = False) -> dict:
        params = {"model": model}
        if replace:
            params["replace"] = "true"
        if isinstance(document, (bytes, str)):
            content = document if isinstance(document, bytes) else document.encode()
            return self._request("POST", f"/v1/tasks/{task_id}/stats",
                                 {"endpoint": "load_task", "task_id": task_id},
                                 params=params, content=content,
                                 headers={"Content-Type": "application/json"})
        return self._request("POST", f"/v1/tasks/{task_id}/stats",
                             {"endpoint": "load_task", "task_id": task_id},
                             params=params, json=document)

    def cardinality(self, task_id: str, table: str,
                    conditions: Sequence[dict]) -> dict:
        doc = {"task_id": task_id, "table": table, "conditions": list(conditions)}
        return self._request("POST", "/v1/cardinality", doc, json=doc)

    def ndv(self, task_id: str, table: str, columns: Sequence[str]) -> dict:
        doc = {"task_id": task_id, "table": table, "columns": list(columns)}
        return self._request("POST", "/v1/ndv", doc, json=doc)

    def task_log(self, task_id: str) -> dict:
        return self._request("GET", f"/v1/tasks/{task_id}/log",
                             {"endpoint": "task_log", "task_id": task_id})

    def health(self) -> dict:
        return self._request("GET", "/v1/health", {"endpoint": "health"})
