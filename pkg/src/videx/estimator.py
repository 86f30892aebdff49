"""Pluggable cardinality and NDV estimation models.

Every model answers two questions behind one interface: how many rows match
a list of single-column range conditions, and how many distinct values a
column list has. Shipped models:

``independence``
    Per-column histogram selectivities multiplied together (no correlation
    correction); NDV of a column list is the product of single-column NDVs
    capped at the row count.

``sample``
    Evaluates conjunctions exactly on the table's embedded row sample and
    scales up; NDV via the guaranteed-error estimator (GEE) on tuple
    frequencies, which is exact when the sample is the whole table.

``oracle``
    Exact brute-force counts; requires a full-table sample. The reference
    the other models are measured against.

New models register under a name and are constructed per statistics
snapshot; a ``model_path`` slot is reserved for models that load trained
artifacts.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

from .catalog import (
    CatalogSnapshot,
    ColumnStatistics,
    EquiDepthHistogram,
    TableDef,
)
from .errors import VidexError
from .sql_frontend import EmptyRange, RangeCond

# Fallback selectivities when a referenced column has no histogram.
MAGIC_EQUALITY_SEL = 0.1
MAGIC_OPEN_RANGE_SEL = 1.0 / 3.0
MAGIC_CLOSED_RANGE_SEL = 1.0 / 4.0


class EstimationError(VidexError):
    pass


class UnknownModelError(EstimationError):
    pass


@dataclass(frozen=True)
class CardinalityEstimate:
    rows: float
    model_name: str
    degraded: bool = False


@dataclass(frozen=True)
class NdvEstimate:
    ndv: float
    model_name: str


def q_error(estimate: float, reference: float) -> float:
    """max(est/ref, ref/est), >= 1; q(0,0) = 1, zeros smoothed to 1 row."""
    if estimate <= 0 and reference <= 0:
        return 1.0
    est = estimate if estimate > 0 else 1.0
    ref = reference if reference > 0 else 1.0
    return max(est / ref, ref / est)


# --------------------------------------------------------------------------
# histogram selectivity

def histogram_selectivity(hist: EquiDepthHistogram, cond: RangeCond) -> float:
    """Fraction of non-null values satisfying the condition, in [0, 1].

    Cumulative model: buckets fully inside the range count whole; the
    boundary bucket contributes linear interpolation over its span (0.5 for
    strings), and a single value's mass is estimated as
    row_fraction / distinct_count -- included by closed operators at the
    boundary, excluded by open ones.
    """
    if isinstance(cond, EmptyRange):
        return 0.0
    if hist.is_empty:
        return 0.0
    numeric = cond.data_type in ("int", "float", "date")
    if cond.max_value is not None:
        upper = _mass_below(hist, cond.max_value, numeric,
                            inclusive=cond.max_operator == "<=")
    else:
        upper = 1.0
    if cond.min_value is not None:
        lower = _mass_below(hist, cond.min_value, numeric,
                            inclusive=cond.min_operator == ">")
    else:
        lower = 0.0
    return max(0.0, min(1.0, upper - lower))


def _mass_below(hist: EquiDepthHistogram, value, numeric: bool,
                inclusive: bool) -> float:
    """Estimated fraction of values <= value (inclusive) or < value."""
    total = 0.0
    counted_point = False
    for b in hist.buckets:
        if not _same_kind(value, b.lower):
            raise EstimationError(
                f"condition value {value!r} does not match histogram scalar "
                f"type {type(b.lower).__name__}")
        if value < b.lower:
            continue
        if value > b.upper:
            total += b.row_fraction
            continue
        # boundary bucket
        point_mass = b.row_fraction / b.distinct_count
        if value == b.upper:
            within = b.row_fraction - point_mass
        elif value == b.lower:
            within = 0.0
        elif numeric:
            within = b.row_fraction * (value - b.lower) / (b.upper - b.lower)
        else:
            within = b.row_fraction * 0.5
        if inclusive and not counted_point:
            within += point_mass
            counted_point = True
        total += max(0.0, min(b.row_fraction, within))
    return max(0.0, min(1.0, total))


def _same_kind(a, b) -> bool:
    return isinstance(a, str) == isinstance(b, str)


# --------------------------------------------------------------------------
# model interface

class EstimatorModel(ABC):
    """Estimation model bound to one statistics snapshot.

    A model answers only for tables whose statistics were loaded at
    construction; models are immutable afterwards and safe to share.
    """

    model_name = "abstract"

    def __init__(self, full_table_stats: CatalogSnapshot,
                 model_path: Optional[str] = None):
        self.full_table_stats = full_table_stats
        self.model_path = model_path

    def _table(self, table: str) -> TableDef:
        try:
            return self.full_table_stats.table(table)
        except KeyError:
            raise EstimationError(f"no statistics loaded for table {table!r}") \
                from None

    @abstractmethod
    def cardinality(self, table: str,
                    range_conds: Sequence[Union[RangeCond, EmptyRange]]) \
            -> CardinalityEstimate:
        """Estimated number of rows of ``table`` matching all conditions."""

    @abstractmethod
    def ndv(self, table: str, column_list: Sequence[str]) -> NdvEstimate:
        """Estimated number of distinct values of the column tuple."""

    def _clamp_rows(self, rows: float, table: TableDef) -> float:
        return max(0.0, min(float(table.stats.row_count), rows))


class IndependenceModel(EstimatorModel):
    """Histogram selectivities multiplied under column independence."""

    model_name = "independence"

    def cardinality(self, table, range_conds) -> CardinalityEstimate:
        tdef = self._table(table)
        rows = float(tdef.stats.row_count)
        degraded = False
        for cond in range_conds:
            if isinstance(cond, EmptyRange):
                return CardinalityEstimate(rows=0.0, model_name=self.model_name)
            cs = tdef.stats.column_stats.get(cond.col_name)
            if cs is None:
                rows *= _magic_selectivity(cond)
                degraded = True
                continue
            if cs.histogram is None:
                sel = _magic_selectivity(cond)
                degraded = True
            elif cs.histogram.is_empty:
                sel = 0.0  # column has no non-null values
            else:
                sel = histogram_selectivity(cs.histogram, cond)
            rows *= sel * (1.0 - cs.null_fraction)
        return CardinalityEstimate(rows=self._clamp_rows(rows, tdef),
                                   model_name=self.model_name, degraded=degraded)

    def ndv(self, table, column_list) -> NdvEstimate:
        tdef = self._table(table)
        product = 1.0
        for col in column_list:
            cs = tdef.stats.column_stats.get(col)
            if cs is None:
                if tdef.column(col) is None:
                    raise EstimationError(
                        f"unknown column {col!r} on table {table!r}")
                raise EstimationError(
                    f"no statistics for column {col!r} on table {table!r}")
            product *= float(cs.ndv)
        value = min(float(tdef.stats.row_count), product)
        return NdvEstimate(ndv=value, model_name=self.model_name)


class SampleModel(EstimatorModel):
    """Exact conjunction evaluation on the embedded sample, scaled up."""

    model_name = "sample"

    def cardinality(self, table, range_conds) -> CardinalityEstimate:
        tdef = self._table(table)
        sample = tdef.stats.sample
        if sample is None:
            raise EstimationError(f"table {table!r} has no sample loaded")
        row_count = tdef.stats.row_count
        if sample.size == 0:
            return CardinalityEstimate(rows=0.0, model_name=self.model_name)
        conds = list(range_conds)
        if any(isinstance(c, EmptyRange) for c in conds):
            return CardinalityEstimate(rows=0.0, model_name=self.model_name)
        if not conds:
            return CardinalityEstimate(rows=float(row_count),
                                       model_name=self.model_name)
        positions = {c.col_name: _column_position(tdef, c.col_name) for c in conds}
        matches = 0
        for row in sample.rows:
            if all(c.matches(row[positions[c.col_name]]) for c in conds):
                matches += 1
        if matches == 0:
            if sample.size >= row_count:
                rows = 0.0  # the sample is the table: nothing unseen can match
            else:
                rows = max(1.0, row_count / (2.0 * sample.size))
        else:
            # integer product first: exact whenever the sample is the table
            rows = (row_count * matches) / sample.size
        return CardinalityEstimate(rows=self._clamp_rows(rows, tdef),
                                   model_name=self.model_name)

    def ndv(self, table, column_list) -> NdvEstimate:
        tdef = self._table(table)
        sample = tdef.stats.sample
        if sample is None:
            raise EstimationError(f"table {table!r} has no sample loaded")
        value = gee_ndv(sample.rows,
                        [_column_position(tdef, c) for c in column_list],
                        tdef.stats.row_count)
        return NdvEstimate(ndv=value, model_name=self.model_name)


def gee_ndv(sample_rows: Sequence[tuple], positions: Sequence[int],
            row_count: int) -> float:
    """Guaranteed-error NDV estimate from sample tuple frequencies.

    sqrt(N/n) * f1 + sum(f_i, i >= 2), capped at N, where f_i counts
    distinct tuples seen exactly i times in the sample. Exact when the
    sample covers the table.
    """
    n = len(sample_rows)
    if n == 0:
        return 0.0
    counts: dict[tuple, int] = {}
    for row in sample_rows:
        t = tuple(row[p] for p in positions)
        if all(v is None for v in t):
            continue
        counts[t] = counts.get(t, 0) + 1
    if not counts:
        return 0.0
    f1 = sum(1 for c in counts.values() if c == 1)
    rest = len(counts) - f1
    scale = math.sqrt(row_count / n) if n < row_count else 1.0
    return min(float(row_count), scale * f1 + rest)


class OracleModel(EstimatorModel):
    """Exact counts over raw rows; needs a sample covering the whole table.

    Serves as the ground truth for plan-fidelity comparisons and q-error
    baselines; in a two-mode comparison it plays the production instance.
    """

    model_name = "oracle"

    def __init__(self, full_table_stats: CatalogSnapshot,
                 model_path: Optional[str] = None):
        super().__init__(full_table_stats, model_path)
        for name, tdef in full_table_stats.tables.items():
            sample = tdef.stats.sample
            if sample is None or sample.size < tdef.stats.row_count:
                raise EstimationError(
                    f"oracle model needs the full table as sample; table "
                    f"{name!r} has {0 if sample is None else sample.size} of "
                    f"{tdef.stats.row_count} rows")

    def cardinality(self, table, range_conds) -> CardinalityEstimate:
        tdef = self._table(table)
        conds = list(range_conds)
        if any(isinstance(c, EmptyRange) for c in conds):
            return CardinalityEstimate(rows=0.0, model_name=self.model_name)
        positions = {c.col_name: _column_position(tdef, c.col_name) for c in conds}
        matches = 0
        for row in tdef.stats.sample.rows:
            if all(c.matches(row[positions[c.col_name]]) for c in conds):
                matches += 1
        return CardinalityEstimate(rows=float(matches), model_name=self.model_name)

    def ndv(self, table, column_list) -> NdvEstimate:
        tdef = self._table(table)
        positions = [_column_position(tdef, c) for c in column_list]
        seen = set()
        for row in tdef.stats.sample.rows:
            t = tuple(row[p] for p in positions)
            if all(v is None for v in t):
                continue
            seen.add(t)
        return NdvEstimate(ndv=float(len(seen)), model_name=self.model_name)


def _column_position(tdef: TableDef, column: str) -> int:
    for i, col in enumerate(tdef.columns):
        if col.name == column:
            return i
    raise EstimationError(f"unknown column {column!r} on table {tdef.name!r}")


def _magic_selectivity(cond: RangeCond) -> float:
    if cond.is_equality:
        return MAGIC_EQUALITY_SEL
    if cond.is_two_sided:
        return MAGIC_CLOSED_RANGE_SEL
    return MAGIC_OPEN_RANGE_SEL


# --------------------------------------------------------------------------
# registry

_REGISTRY: dict[str, Callable[..., EstimatorModel]] = {}


def register_model(name: str, constructor: Callable[..., EstimatorModel]) -> None:
    """Add a model constructor under a unique name."""
    if name in _REGISTRY:
        raise EstimationError(f"model {name!r} already registered")
    _REGISTRY[name] = constructor


def registered_models() -> list[str]:
    return sorted(_REGISTRY)


def create_model(name: str, full_table_stats: CatalogSnapshot,
                 model_path: Optional[str] = None) -> EstimatorModel:
    try:
        constructor = _REGISTRY[name]
    except KeyError:
        raise UnknownModelError(
            f"unknown model {name!r}; registered models: "
            f"{', '.join(registered_models())}") from None
    return constructor(full_table_stats, model_path)


register_model("independence", IndependenceModel)
register_model("sample", SampleModel)
register_model("oracle", OracleModel)


# --------------------------------------------------------------------------
# in-process estimator client

class LocalEstimatorClient:
    """Planner-facing client that calls a model directly (no service hop)."""

    def __init__(self, model: EstimatorModel):
        self.model = model
        self.requests = 0
        self.degraded = 0

    @property
    def model_name(self) -> str:
        return self.model.model_name

    def cardinality(self, table: str, conds) -> float:
        self.requests += 1
        est = self.model.cardinality(table, conds)
        if est.degraded:
            self.degraded += 1
        return est.rows

    def ndv(self, table: str, columns) -> float:
        self.requests += 1
        return self.model.ndv(table, columns).ndv

    def provenance(self) -> dict:
        return {"model": self.model_name, "requests": self.requests,
                "cache_hits": 0, "degraded": self.degraded}
