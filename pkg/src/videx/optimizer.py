"""Deterministic cost-based planner over statistics-only tables.

Plans left-deep nested-loop joins: simple statistics (row counts, page
counts) are read straight from the snapshot, while every cardinality and
NDV estimate is obtained through an estimator client, so the planner never
needs raw data. Virtual indexes enter path enumeration exactly like real
ones and are only distinguishable in EXPLAIN output.

Search is exhaustive over join orders up to EXHAUSTIVE_TABLE_LIMIT tables
(greedy smallest-intermediate beyond that), with per-table min-cost access
paths and lexicographic signature tie-breaks, which makes plans a pure
function of (query, snapshot, virtual indexes, estimator responses).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence, Union

from .catalog import CatalogSnapshot, CostConstants, IndexDef, TableDef
from .errors import VidexError
from .sql_frontend import (
    EmptyRange,
    LogicalQuery,
    RangeCond,
    extract_range_conditions,
)

EXHAUSTIVE_TABLE_LIMIT = 8

FULL_SCAN = "full_scan"
INDEX_RANGE = "index_range"
INDEX_COVERING = "index_covering"


class PlanningError(VidexError):
    """Planning aborted; carries the estimator request that failed, if any."""

    def __init__(self, message: str, request: Optional[dict] = None):
        super().__init__(message)
        self.request = request


@dataclass(frozen=True)
class VirtualIndex(IndexDef):
    """Hypothetical index: planned against, never materialized."""

    origin = "virtual"


class EstimatorClient(Protocol):
    """What the planner needs from an estimation backend."""

    model_name: str

    def cardinality(self, table: str, conds: Sequence[RangeCond]) -> float: ...

    def ndv(self, table: str, columns: Sequence[str]) -> float: ...

    def provenance(self) -> dict: ...


@dataclass(frozen=True)
class AccessPath:
    """One way to read a table.

    ``est_rows`` is the estimated row count the access method reads per
    probe: matched-condition rows for index paths (further shrunk by join-key
    NDV when the prefix uses join columns), the full table for scans.
    """

    kind: str
    index: Optional[IndexDef] = None
    matched_conditions: tuple = ()
    matched_join_columns: tuple[str, ...] = ()
    est_rows: float = 0.0
    cost: float = 0.0

    @property
    def index_name(self) -> Optional[str]:
        return self.index.name if self.index is not None else None

    @property
    def origin(self) -> Optional[str]:
        return self.index.origin if self.index is not None else None

    def sort_key(self) -> tuple:
        return (self.kind, self.index_name or "")


@dataclass(frozen=True)
class PlanOperator:
    alias: str
    table_name: str
    access_path: AccessPath
    table_rows: float  # rows surviving this table's own filters
    est_rows: float  # running cardinality after this operator
    cost: float
    candidates: tuple[AccessPath, ...] = ()


@dataclass(frozen=True)
class PhysicalPlan:
    join_order: tuple[str, ...]
    operators: tuple[PlanOperator, ...]
    total_cost: float

    @property
    def signature(self) -> str:
        parts = []
        for op in self.operators:
            p = f"{op.alias}:{op.access_path.kind}"
            if op.access_path.index is not None:
                p += f":{op.access_path.index.name}"
            parts.append(p)
        return " -> ".join(parts)


@dataclass(frozen=True)
class ExplainDocument:
    """Deterministic, serializable record of a planning run."""

    query: str
    model_name: str
    plan: PhysicalPlan
    provenance: dict = field(default_factory=dict)
    group_by: Optional[dict] = None

    def to_doc(self) -> dict:
        doc = {
            "query": self.query,
            "model": self.model_name,
            "join_order": list(self.plan.join_order),
            "operators": [self._operator_doc(op) for op in self.plan.operators],
            "total_cost": self.plan.total_cost,
            "signature": self.plan.signature,
            "provenance": dict(self.provenance),
        }
        if self.group_by is not None:
            doc["group_by"] = dict(self.group_by)
        return doc

    @staticmethod
    def _operator_doc(op: PlanOperator) -> dict:
        return {
            "table": op.alias,
            "table_name": op.table_name,
            "access_path": _path_doc(op.access_path),
            "table_rows": op.table_rows,
            "est_rows": op.est_rows,
            "cost": op.cost,
            "candidates": [
                {**_path_doc(c), "chosen": c == op.access_path}
                for c in op.candidates
            ],
        }

    def canonical_json(self) -> bytes:
        return (json.dumps(self.to_doc(), sort_keys=True, indent=2,
                           ensure_ascii=False) + "\n").encode()


def _path_doc(path: AccessPath) -> dict:
    return {
        "kind": path.kind,
        "index": path.index_name,
        "origin": path.origin,
        "matched_columns": [
            c.col_name for c in path.matched_conditions
        ],
        "matched_join_columns": list(path.matched_join_columns),
        "est_rows": path.est_rows,
        "cost": path.cost,
    }


# --------------------------------------------------------------------------
# path enumeration and costing

def enumerate_access_paths(table: TableDef,
                           conds: Sequence[Union[RangeCond, EmptyRange]],
                           indexes: Sequence[IndexDef],
                           referenced_columns: frozenset[str] = frozenset(),
                           join_key_columns: frozenset[str] = frozenset(),
                           ) -> list[AccessPath]:
    """All candidate ways to read a table; rows/costs filled by the caller.

    Always includes the full scan. Each index contributes its longest
    usable prefix: equality conditions (or join-key equalities) on leading
    columns, then at most one range condition. An index containing every
    referenced column additionally qualifies as covering; a covering index
    is usable even with no matched prefix (full index-only scan).
    """
    cond_by_col = {c.col_name: c for c in conds}
    paths = [AccessPath(kind=FULL_SCAN)]
    for idx in sorted(indexes, key=lambda i: i.name):
        matched, join_cols = _match_index_prefix(idx, cond_by_col, join_key_columns)
        covering = referenced_columns and set(idx.columns) >= set(referenced_columns)
        if not matched and not join_cols and not covering:
            continue
        kind = INDEX_COVERING if covering else INDEX_RANGE
        paths.append(AccessPath(
            kind=kind,
            index=idx,
            matched_conditions=tuple(matched),
            matched_join_columns=tuple(join_cols),
        ))
    return paths


def _match_index_prefix(idx: IndexDef, cond_by_col: dict,
                        join_key_columns: frozenset[str]) -> tuple[list, list]:
    matched: list = []
    join_cols: list[str] = []
    for col in idx.columns:
        cond = cond_by_col.get(col)
        if isinstance(cond, EmptyRange):
            matched.append(cond)  # empty range: the path reads nothing
            break
        if isinstance(cond, RangeCond) and cond.is_equality:
            matched.append(cond)
            continue
        if col in join_key_columns:
            join_cols.append(col)
            continue
        if isinstance(cond, RangeCond):
            matched.append(cond)  # trailing range ends the prefix
            break
        break
    return matched, join_cols


def cost_access_path(path: AccessPath, table_stats, constants: CostConstants,
                     est_rows: Optional[float] = None) -> float:
    """Cost of one probe of the path under the snapshot's cost constants."""
    rows = path.est_rows if est_rows is None else est_rows
    if path.kind == FULL_SCAN:
        return (table_stats.page_count * constants.seq_page_cost
                + table_stats.row_count * constants.row_cpu_cost)
    if path.kind == INDEX_RANGE:
        return rows * (constants.rand_page_cost + constants.row_cpu_cost)
    if path.kind == INDEX_COVERING:
        return rows * (constants.index_row_cost + constants.row_cpu_cost)
    raise PlanningError(f"unknown access path kind {path.kind!r}")


def estimate_join_cardinality(left_rows: float, right_rows: float,
                              ndv_left_key: float, ndv_right_key: float) -> float:
    """Containment join estimate: |L|*|R| / max(ndv_L, ndv_R, 1)."""
    return left_rows * right_rows / max(ndv_left_key, ndv_right_key, 1.0)


# --------------------------------------------------------------------------
# planning

@dataclass
class _TableContext:
    alias: str
    table: TableDef
    merged_conds: list
    real_conds: list
    has_empty: bool
    indexes: list
    referenced: frozenset
    join_columns: frozenset  # all columns of this table used in any join pred
    card: float = 0.0
    base_cards: dict = field(default_factory=dict)  # frozenset(cols) -> rows


class _NdvMemo:
    """One estimator request per distinct (table, columns) per planning run."""

    def __init__(self, estimator: EstimatorClient):
        self.estimator = estimator
        self.values: dict[tuple, float] = {}

    def get(self, table: str, columns: Sequence[str]) -> float:
        key = (table, tuple(columns))
        if key not in self.values:
            self.values[key] = self.estimator.ndv(table, list(columns))
        return self.values[key]


def plan_query(query: LogicalQuery, snapshot: CatalogSnapshot,
               virtual_indexes: Sequence[VirtualIndex],
               estimator: EstimatorClient,
               constants: Optional[CostConstants] = None) -> PhysicalPlan:
    """Minimum-cost left-deep plan; deterministic given estimator responses.

    Estimator request order is fixed: each table's condition cardinalities
    first (in FROM-clause order), then join NDVs in enumeration sequence.
    """
    constants = constants or snapshot.cost_constants
    contexts = {
        t.alias: _prepare_table(query, t.alias, snapshot, virtual_indexes, estimator)
        for t in query.tables
    }
    ndv = _NdvMemo(estimator)
    aliases = sorted(contexts)
    if len(aliases) <= EXHAUSTIVE_TABLE_LIMIT:
        orders = itertools.permutations(aliases)
    else:
        orders = [_greedy_order(query, contexts, ndv)]
    best: Optional[PhysicalPlan] = None
    for order in orders:
        plan = _evaluate_order(order, query, contexts, ndv, constants)
        if best is None or (plan.total_cost, plan.signature) \
                < (best.total_cost, best.signature):
            best = plan
    return best


def _prepare_table(query: LogicalQuery, alias: str, snapshot: CatalogSnapshot,
                   virtual_indexes: Sequence[VirtualIndex],
                   estimator: EstimatorClient) -> _TableContext:
    tref = query.table_for_alias(alias)
    table = snapshot.table(tref.name)
    merged = extract_range_conditions(query, alias)
    real_conds = [c for c in merged if isinstance(c, RangeCond)]
    has_empty = any(isinstance(c, EmptyRange) for c in merged)
    indexes = sorted(
        list(table.indexes)
        + [v for v in virtual_indexes if v.table == tref.name],
        key=lambda i: i.name)
    join_columns = frozenset(
        ref.column
        for pred in query.join_predicates
        for ref in (pred.left, pred.right)
        if ref.table == alias)
    ctx = _TableContext(
        alias=alias,
        table=table,
        merged_conds=merged,
        real_conds=real_conds,
        has_empty=has_empty,
        indexes=indexes,
        referenced=query.referenced_columns(alias, table),
        join_columns=join_columns,
    )
    row_count = float(table.stats.row_count)
    if has_empty:
        ctx.card = 0.0
    elif real_conds:
        ctx.card = estimator.cardinality(tref.name, real_conds)
    else:
        ctx.card = row_count
    # base cardinalities for every condition subset an index prefix can match
    ctx.base_cards[frozenset()] = row_count
    cond_by_col = {c.col_name: c for c in merged}
    for idx in ctx.indexes:
        for subset in _achievable_cond_subsets(idx, cond_by_col, ctx.join_columns):
            key = frozenset(c.col_name for c in subset)
            if key in ctx.base_cards:
                continue
            if any(isinstance(c, EmptyRange) for c in subset):
                ctx.base_cards[key] = 0.0
            else:
                ctx.base_cards[key] = estimator.cardinality(tref.name, subset)
    return ctx


def _achievable_cond_subsets(idx: IndexDef, cond_by_col: dict,
                             join_columns: frozenset) -> list[list]:
    """Real-condition sets an index prefix may match, over any join context."""
    out: list[list] = []
    current: list = []
    for col in idx.columns:
        cond = cond_by_col.get(col)
        if isinstance(cond, EmptyRange):
            out.append(current + [cond])
            break
        if isinstance(cond, RangeCond) and cond.is_equality:
            current = current + [cond]
            out.append(current)
            continue
        if col in join_columns:
            out.append(list(current))
            continue
        if isinstance(cond, RangeCond):
            out.append(current + [cond])
            break
        break
    return [s for s in out if s]


def _paths_for(ctx: _TableContext, avail_join_cols: frozenset,
               ndv: _NdvMemo, constants: CostConstants) -> list[AccessPath]:
    """Candidate paths with per-probe row estimates and per-probe costs."""
    raw = enumerate_access_paths(ctx.table, ctx.merged_conds, ctx.indexes,
                                 ctx.referenced, avail_join_cols)
    out = []
    for path in raw:
        if path.kind == FULL_SCAN:
            rows = float(ctx.table.stats.row_count)
        else:
            key = frozenset(c.col_name for c in path.matched_conditions)
            rows = ctx.base_cards[key]
            if path.matched_join_columns:
                joint = ndv.get(ctx.table.name, sorted(path.matched_join_columns))
                rows = rows / max(joint, 1.0)
        cost = cost_access_path(path, ctx.table.stats, constants, rows)
        out.append(replace(path, est_rows=rows, cost=cost))
    return out


def _join_links(query: LogicalQuery, alias: str, prefix: Sequence[str]) -> list:
    """Join predicates linking ``alias`` to tables already in the prefix,
    oriented as (prefix_ref, new_ref)."""
    placed = set(prefix)
    links = []
    for pred in query.join_predicates:
        if pred.left.table == alias and pred.right.table in placed:
            links.append((pred.right, pred.left))
        elif pred.right.table == alias and pred.left.table in placed:
            links.append((pred.left, pred.right))
    links.sort(key=lambda lr: (lr[0].table, lr[0].column, lr[1].column))
    return links


def _containment_factor(links, query: LogicalQuery, right_table: str,
                        ndv: _NdvMemo) -> float:
    """Product over prefix-table groups of max(joint NDV left, right, 1)."""
    factor = 1.0
    by_left: dict[str, list] = {}
    for prefix_ref, new_ref in links:
        by_left.setdefault(prefix_ref.table, []).append((prefix_ref, new_ref))
    for left_alias in sorted(by_left):
        group = by_left[left_alias]
        lcols = [p.column for p, _ in group]
        rcols = [n.column for _, n in group]
        ndv_left = ndv.get(query.table_for_alias(left_alias).name, lcols)
        ndv_right = ndv.get(right_table, rcols)
        factor *= max(ndv_left, ndv_right, 1.0)
    return factor


def _evaluate_order(order: Sequence[str], query: LogicalQuery,
                    contexts: dict, ndv: _NdvMemo,
                    constants: CostConstants) -> PhysicalPlan:
    operators = []
    total_cost = 0.0
    running = 0.0
    for j, alias in enumerate(order):
        ctx = contexts[alias]
        if j == 0:
            probes = 1.0
            links = []
        else:
            probes = running
            links = _join_links(query, alias, order[:j])
        avail = frozenset(ref.column for _, ref in links)
        candidates = _paths_for(ctx, avail, ndv, constants)
        candidates = [replace(p, cost=probes * p.cost) for p in candidates]
        chosen = min(candidates, key=lambda p: (p.cost, p.sort_key()))
        if j == 0:
            running = ctx.card
        else:
            factor = _containment_factor(links, query, ctx.table.name, ndv)
            running = running * ctx.card / factor
        operators.append(PlanOperator(
            alias=alias,
            table_name=ctx.table.name,
            access_path=chosen,
            table_rows=ctx.card,
            est_rows=running,
            cost=chosen.cost,
            candidates=tuple(candidates),
        ))
        total_cost += chosen.cost
    return PhysicalPlan(join_order=tuple(order), operators=tuple(operators),
                        total_cost=total_cost)


def _greedy_order(query: LogicalQuery, contexts: dict, ndv: _NdvMemo) -> tuple:
    remaining = sorted(contexts)
    order = [min(remaining, key=lambda a: (contexts[a].card, a))]
    remaining.remove(order[0])
    running = contexts[order[0]].card
    while remaining:
        best_alias, best_rows = None, None
        for alias in remaining:
            links = _join_links(query, alias, order)
            factor = _containment_factor(links, query,
                                         contexts[alias].table.name, ndv)
            rows = running * contexts[alias].card / factor
            if best_rows is None or (rows, alias) < (best_rows, best_alias):
                best_alias, best_rows = alias, rows
        order.append(best_alias)
        remaining.remove(best_alias)
        running = best_rows
    return tuple(order)


def explain(plan: PhysicalPlan, query_text: str, model_name: str,
            provenance: Optional[dict] = None,
            group_by: Optional[dict] = None) -> ExplainDocument:
    """Wrap a plan into its deterministic document form."""
    return ExplainDocument(query=query_text, model_name=model_name, plan=plan,
                           provenance=provenance or {}, group_by=group_by)


def plan_and_explain(query: LogicalQuery, snapshot: CatalogSnapshot,
                     virtual_indexes: Sequence[VirtualIndex],
                     estimator: EstimatorClient,
                     constants: Optional[CostConstants] = None) -> ExplainDocument:
    """plan_query + group-by NDV + provenance in one deterministic pass."""
    plan = plan_query(query, snapshot, virtual_indexes, estimator, constants)
    group_doc = None
    if query.group_by:
        ndv = _NdvMemo(estimator)
        by_alias: dict[str, list[str]] = {}
        for ref in query.group_by:
            by_alias.setdefault(ref.table, []).append(ref.column)
        product = 1.0
        for alias in sorted(by_alias):
            table_name = query.table_for_alias(alias).name
            product *= ndv.get(table_name, by_alias[alias])
        final_rows = plan.operators[-1].est_rows
        group_doc = {
            "columns": [f"{r.table}.{r.column}" for r in query.group_by],
            "estimated_groups": min(final_rows, product),
        }
    return explain(plan, query.text, getattr(estimator, "model_name", "unknown"),
                   provenance=estimator.provenance() if hasattr(estimator, "provenance")
                   else {}, group_by=group_doc)
