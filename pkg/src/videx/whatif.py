"""Analysis sessions: virtual-index what-if runs, plan diffs, q-error reports.

A session binds one metadata snapshot to one estimation model behind a
statistics server endpoint. EXPLAIN runs parse locally but fetch every
cardinality/NDV over the wire, so a session created from a metadata file
never touches raw rows. Virtual indexes are session-private: two sessions
over the same task see independent index sets.

Plan comparison is two-sided: diff_plans aligns two EXPLAIN documents of
the same query and scores per-operator q-errors; qerror_report aggregates
a workload across two sessions (typically an exact-oracle reference vs. a
statistics-only model) into join-order / index-selection match rates and
an average q-error.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

from .catalog import CatalogSnapshot, load_metadata, serialize_metadata, snapshot_digest
from .errors import VidexError
from .optimizer import (
    ExplainDocument,
    PlanningError,
    VirtualIndex,
    plan_and_explain,
)
from .sql_frontend import parse
from .estimator import q_error
from .stat_server import (
    StatsClient,
    StatsConnectError,
    StatsRequestError,
)


class WhatifError(VidexError):
    pass


_session_counter = itertools.count(1)


class HttpEstimatorClient:
    """Estimator client that forwards every request to a stats-server task."""

    def __init__(self, client: StatsClient, task_id: str, model_name: str):
        self.client = client
        self.task_id = task_id
        self.model_name = model_name
        self.requests = 0
        self.cache_hits = 0
        self.degraded = 0

    def cardinality(self, table: str, conds) -> float:
        wire = [c.to_wire() for c in conds]
        request = {"task_id": self.task_id, "table": table, "conditions": wire}
        body = self._call(lambda: self.client.cardinality(self.task_id, table, wire),
                          request)
        if body.get("degraded"):
            self.degraded += 1
        return float(body["rows"])

    def ndv(self, table: str, columns) -> float:
        request = {"task_id": self.task_id, "table": table,
                   "columns": list(columns)}
        body = self._call(lambda: self.client.ndv(self.task_id, table,
                                                  list(columns)), request)
        return float(body["ndv"])

    def _call(self, fn, request: dict) -> dict:
        try:
            body = fn()
        except StatsRequestError as exc:
            raise PlanningError(f"estimation request failed: {exc}",
                                request=exc.request) from exc
        except StatsConnectError as exc:
            raise PlanningError(str(exc), request=request) from exc
        self.requests += 1
        if body.get("cached"):
            self.cache_hits += 1
        return body

    def provenance(self) -> dict:
        return {"model": self.model_name, "requests": self.requests,
                "cache_hits": self.cache_hits, "degraded": self.degraded}


class Session:
    """One what-if analysis context over an immutable snapshot.

    Index mutations and explain calls serialize on a session-level lock;
    distinct sessions are independent.
    """

    def __init__(self, session_id: str, task_id: str, snapshot: CatalogSnapshot,
                 model_name: str, stats_url: str):
        self.session_id = session_id
        self.task_id = task_id
        self.snapshot = snapshot
        self.model_name = model_name
        self.stats_url = stats_url
        self.virtual_indexes: list[VirtualIndex] = []
        self._client = StatsClient(stats_url)
        self._lock = threading.RLock()

    # -- virtual index management -------------------------------------------
    def add_virtual_index(self, table: str, columns: Sequence[str],
                          unique: bool = False,
                          name: Optional[str] = None) -> VirtualIndex:
        with self._lock:
            if table not in self.snapshot.tables:
                raise WhatifError(f"unknown table {table!r}")
            tdef = self.snapshot.table(table)
            cols = tuple(columns)
            if not cols:
                raise WhatifError("virtual index needs at least one column")
            if len(set(cols)) != len(cols):
                raise WhatifError(f"duplicate columns in index: {cols}")
            for col in cols:
                if tdef.column(col) is None:
                    raise WhatifError(f"unknown column {col!r} on table {table!r}")
            if name is None:
                name = f"vidx_{table}_{'_'.join(cols)}"
            taken = {v.name for v in self.virtual_indexes}
            taken.update(i.name for t in self.snapshot.tables.values()
                         for i in t.indexes)
            if name in taken:
                raise WhatifError(f"index name {name!r} already in use")
            vindex = VirtualIndex(name=name, table=table, columns=cols,
                                  unique=unique)
            self.virtual_indexes.append(vindex)
            return vindex

    def drop_virtual_index(self, name: str) -> dict:
        with self._lock:
            for i, vindex in enumerate(self.virtual_indexes):
                if vindex.name == name:
                    del self.virtual_indexes[i]
                    return {"dropped": name}
            real = {i.name for t in self.snapshot.tables.values() for i in t.indexes}
            if name in real:
                raise WhatifError(f"{name!r} is a real index and cannot be dropped")
            raise WhatifError(f"unknown virtual index {name!r}")

    # -- planning --------------------------------------------------------------
    def explain_sql(self, sql: str) -> ExplainDocument:
        with self._lock:
            query = parse(sql, self.snapshot)
            estimator = HttpEstimatorClient(self._client, self.task_id,
                                            self.model_name)
            return plan_and_explain(query, self.snapshot,
                                    tuple(self.virtual_indexes), estimator)

    def describe(self) -> dict:
        """Full session document: tables with statistics, virtual indexes."""
        from .catalog import encode_scalar
        with self._lock:
            tables = []
            for name, tdef in sorted(self.snapshot.tables.items()):
                columns = []
                for col in tdef.columns:
                    cs = tdef.stats.column_stats.get(col.name)
                    entry = {"name": col.name, "type": col.data_type,
                             "nullable": col.nullable}
                    if cs is not None:
                        entry.update({
                            "ndv": cs.ndv,
                            "null_fraction": cs.null_fraction,
                            "min": encode_scalar(col.data_type, cs.min_value),
                            "max": encode_scalar(col.data_type, cs.max_value),
                            "histogram": None if cs.histogram is None else {
                                "buckets": [
                                    {"lower": encode_scalar(col.data_type, b.lower),
                                     "upper": encode_scalar(col.data_type, b.upper),
                                     "row_fraction": b.row_fraction,
                                     "distinct_count": b.distinct_count}
                                    for b in cs.histogram.buckets
                                ]},
                        })
                    columns.append(entry)
                tables.append({
                    "name": name,
                    "row_count": tdef.stats.row_count,
                    "data_size_bytes": tdef.stats.data_size_bytes,
                    "page_count": tdef.stats.page_count,
                    "indexes": [
                        {"name": i.name, "columns": list(i.columns),
                         "unique": i.unique, "origin": "real"}
                        for i in sorted(tdef.indexes, key=lambda i: i.name)
                    ],
                    "columns": columns,
                })
            return {
                "session_id": self.session_id,
                "task_id": self.task_id,
                "model": self.model_name,
                "stats_url": self.stats_url,
                "tables": tables,
                "virtual_indexes": [
                    {"name": v.name, "table": v.table, "columns": list(v.columns),
                     "unique": v.unique, "origin": "virtual"}
                    for v in self.virtual_indexes
                ],
            }

    def close(self) -> None:
        self._client.close()


def create_session(metadata_source: Union[bytes, str, Path, Mapping],
                   model_name: str, stats_url: str,
                   session_id: Optional[str] = None,
                   replace: bool = False) -> Session:
    """Load metadata into the stats server and open a session over it.

    The task id derives from the snapshot content digest and the model, so
    identical files reuse the already-loaded task (and its cached model)
    instead of re-importing.
    """
    snapshot = _load_source(metadata_source)
    task_id = f"task-{snapshot_digest(snapshot)[:16]}-{model_name}"
    client = StatsClient(stats_url)
    try:
        client.load_task(task_id, serialize_metadata(snapshot), model_name,
                         replace=replace)
    finally:
        client.close()
    if session_id is None:
        session_id = f"s-{next(_session_counter):06d}"
    return Session(session_id=session_id, task_id=task_id, snapshot=snapshot,
                   model_name=model_name, stats_url=stats_url)


def _load_source(source: Union[bytes, str, Path, Mapping]) -> CatalogSnapshot:
    if isinstance(source, Mapping):
        from .catalog import snapshot_from_doc, validate_snapshot
        from .errors import MetadataValidationError
        snapshot = snapshot_from_doc(source)
        violations = validate_snapshot(snapshot)
        if violations:
            raise MetadataValidationError(violations)
        return snapshot
    if isinstance(source, Path):
        return load_metadata(source.read_bytes())
    if isinstance(source, str) and not source.lstrip().startswith("{"):
        return load_metadata(Path(source).read_bytes())
    return load_metadata(source)


# --------------------------------------------------------------------------
# plan comparison

@dataclass(frozen=True)
class PlanDiff:
    """Structural and estimate-level differences between two plans."""

    query: str
    join_order_equal: bool
    path_differences: tuple[dict, ...]
    operator_rows: tuple[tuple[float, float], ...]
    operator_q_errors: tuple[float, ...]
    avg_q_error: float
    total_cost_a: float
    total_cost_b: float

    @property
    def index_selection_equal(self) -> bool:
        return not self.path_differences

    def to_doc(self) -> dict:
        return {
            "query": self.query,
            "join_order_equal": self.join_order_equal,
            "index_selection_equal": self.index_selection_equal,
            "path_differences": [dict(d) for d in self.path_differences],
            "operator_rows": [list(pair) for pair in self.operator_rows],
            "operator_q_errors": list(self.operator_q_errors),
            "avg_q_error": self.avg_q_error,
            "total_cost_a": self.total_cost_a,
            "total_cost_b": self.total_cost_b,
            "total_cost_delta": self.total_cost_b - self.total_cost_a,
        }


def _as_doc(document: Union[ExplainDocument, Mapping]) -> Mapping:
    if isinstance(document, ExplainDocument):
        return document.to_doc()
    return document


def diff_plans(a: Union[ExplainDocument, Mapping],
               b: Union[ExplainDocument, Mapping]) -> PlanDiff:
    """Compare two EXPLAIN documents of the same query.

    Operators align by join position; per-table access paths compare by
    table alias. q-errors use 1-row smoothing and average arithmetically.
    """
    da, db = _as_doc(a), _as_doc(b)
    if da["query"] != db["query"]:
        raise WhatifError("cannot diff plans of different query texts")
    join_order_equal = list(da["join_order"]) == list(db["join_order"])
    paths_a = {op["table"]: op["access_path"] for op in da["operators"]}
    paths_b = {op["table"]: op["access_path"] for op in db["operators"]}
    differences = []
    for table in sorted(set(paths_a) | set(paths_b)):
        pa, pb = paths_a.get(table), paths_b.get(table)
        ka = (pa["kind"], pa["index"]) if pa else None
        kb = (pb["kind"], pb["index"]) if pb else None
        if ka != kb:
            differences.append({
                "table": table,
                "a": {"kind": ka[0], "index": ka[1]} if ka else None,
                "b": {"kind": kb[0], "index": kb[1]} if kb else None,
            })
    rows = []
    qerrs = []
    for op_a, op_b in zip(da["operators"], db["operators"]):
        pair = (float(op_a["est_rows"]), float(op_b["est_rows"]))
        rows.append(pair)
        qerrs.append(q_error(pair[1], pair[0]))
    avg = sum(qerrs) / len(qerrs) if qerrs else 1.0
    return PlanDiff(
        query=da["query"],
        join_order_equal=join_order_equal,
        path_differences=tuple(differences),
        operator_rows=tuple(rows),
        operator_q_errors=tuple(qerrs),
        avg_q_error=avg,
        total_cost_a=float(da["total_cost"]),
        total_cost_b=float(db["total_cost"]),
    )


def qerror_report(workload: Sequence[str], mode_a: Session,
                  mode_b: Session) -> dict:
    """Run a workload under two sessions and aggregate plan fidelity.

    Per-query failures are recorded in the report, never fatal.
    """
    per_query = []
    errors = []
    order_matches = 0
    index_matches = 0
    qerr_sum = 0.0
    compared = 0
    for sql in workload:
        try:
            doc_a = mode_a.explain_sql(sql).to_doc()
            doc_b = mode_b.explain_sql(sql).to_doc()
            diff = diff_plans(doc_a, doc_b)
        except VidexError as exc:
            errors.append({"query": sql, "error": str(exc)})
            continue
        compared += 1
        order_matches += diff.join_order_equal
        index_matches += diff.index_selection_equal
        qerr_sum += diff.avg_q_error
        per_query.append({
            "query": sql,
            "join_order_equal": diff.join_order_equal,
            "index_selection_equal": diff.index_selection_equal,
            "avg_q_error": diff.avg_q_error,
        })
    return {
        "queries": len(workload),
        "compared": compared,
        "errors": errors,
        "match_rate_join_order": order_matches / compared if compared else 0.0,
        "match_rate_index": index_matches / compared if compared else 0.0,
        "avg_q_error": qerr_sum / compared if compared else 0.0,
        "per_query": per_query,
    }
