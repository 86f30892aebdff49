"""Statistics data model and the portable metadata document.

A CatalogSnapshot is an immutable, point-in-time replica of a database's
schema plus statistics: row counts, sizes, per-column NDV, null fractions,
equi-depth histograms and (optionally) a bounded row sample per table.
It carries everything planning and estimation need, so no process that
holds only a snapshot ever touches production data.

The snapshot serializes to a single self-describing JSON document
(``format_version`` 1). Serialization is canonical -- stable key order,
tables sorted by name -- so equal snapshots produce byte-identical
documents. See docs/metadata_format.md for the field-by-field contract.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, IO, Iterable, Mapping, Optional, Union

from .errors import MetadataParseError, MetadataValidationError

FORMAT_VERSION = 1
DEFAULT_PAGE_SIZE = 16384
# Hard ceiling on rows embedded in a table sample; the collector clamps to it.
SAMPLE_CAP = 100_000
FRACTION_SUM_TOL = 1e-9

DATA_TYPES = ("int", "float", "string", "date")
NUMERIC_TYPES = ("int", "float", "date")  # dates are epoch-day integers

# Scalars are plain Python values: int, float, str. Date values are carried
# as epoch-day integers and distinguished only by the column's declared type.
Scalar = Union[int, float, str]


def encode_scalar(data_type: str, value: Optional[Scalar]) -> Optional[dict]:
    """Tagged (type, value) JSON form of a scalar; None stays None."""
    if value is None:
        return None
    return {"type": data_type, "value": value}


def decode_scalar(obj: Any, path: str) -> tuple[str, Scalar]:
    if not isinstance(obj, dict):
        raise MetadataParseError("scalar must be a {type, value} object", path)
    dtype = obj.get("type")
    if dtype not in DATA_TYPES:
        raise MetadataParseError(f"unknown scalar type {dtype!r}", f"{path}.type")
    value = obj.get("value")
    if not _value_matches_type(dtype, value):
        raise MetadataParseError(
            f"value {value!r} does not match scalar type {dtype!r}", f"{path}.value"
        )
    if dtype == "float":
        value = float(value)
    return dtype, value


def _value_matches_type(dtype: str, value: Any) -> bool:
    if dtype in ("int", "date"):
        return isinstance(value, int) and not isinstance(value, bool)
    if dtype == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if dtype == "string":
        return isinstance(value, str)
    return False


@dataclass(frozen=True)
class Violation:
    """One broken invariant: where (table/column path) and which rule."""

    path: str
    rule: str
    message: str


@dataclass(frozen=True)
class ColumnDef:
    name: str
    data_type: str
    nullable: bool = True


@dataclass(frozen=True)
class HistogramBucket:
    lower: Scalar
    upper: Scalar
    row_fraction: float
    distinct_count: int


@dataclass(frozen=True)
class EquiDepthHistogram:
    """Ordered buckets holding near-equal row shares of the non-null values."""

    buckets: tuple[HistogramBucket, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.buckets

    def total_fraction(self) -> float:
        return sum(b.row_fraction for b in self.buckets)


@dataclass(frozen=True)
class ColumnStatistics:
    ndv: int
    null_fraction: float
    min_value: Optional[Scalar] = None
    max_value: Optional[Scalar] = None
    histogram: Optional[EquiDepthHistogram] = None


@dataclass(frozen=True)
class Sample:
    """Bounded, seed-reproducible row subset stored inside the snapshot."""

    seed: int
    size: int
    rows: tuple[tuple, ...] = ()


@dataclass(frozen=True)
class TableStatistics:
    row_count: int
    data_size_bytes: int
    page_count: int
    column_stats: Mapping[str, ColumnStatistics] = field(default_factory=dict)
    sample: Optional[Sample] = None


@dataclass(frozen=True)
class IndexDef:
    """Physical index descriptor. Virtual counterparts live in the optimizer."""

    name: str
    table: str
    columns: tuple[str, ...]
    unique: bool = False

    origin = "real"


@dataclass(frozen=True)
class CostConstants:
    seq_page_cost: float = 1.0
    rand_page_cost: float = 4.0
    row_cpu_cost: float = 0.01
    index_row_cost: float = 0.005


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]
    indexes: tuple[IndexDef, ...]
    stats: TableStatistics

    def __post_init__(self):
        # canonical index order; column order is meaningful (rows align to it)
        object.__setattr__(self, "indexes",
                           tuple(sorted(self.indexes, key=lambda i: i.name)))

    def column(self, name: str) -> Optional[ColumnDef]:
        for col in self.columns:
            if col.name == name:
                return col
        return None

    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)


@dataclass(frozen=True)
class CatalogSnapshot:
    """Immutable schema + statistics replica; safe to share across threads."""

    format_version: int = FORMAT_VERSION
    page_size: int = DEFAULT_PAGE_SIZE
    cost_constants: CostConstants = CostConstants()
    tables: Mapping[str, TableDef] = field(default_factory=dict)

    def table(self, name: str) -> TableDef:
        try:
            return self.tables[name]
        except KeyError:
            raise KeyError(f"unknown table {name!r}") from None


# --------------------------------------------------------------------------
# validation

def validate_snapshot(snapshot: CatalogSnapshot) -> list[Violation]:
    """Check every type invariant; violations are data, not exceptions."""
    out: list[Violation] = []
    cc = snapshot.cost_constants
    for name in ("seq_page_cost", "rand_page_cost", "row_cpu_cost", "index_row_cost"):
        if getattr(cc, name) <= 0:
            out.append(Violation(f"cost_constants.{name}", "COST_CONSTANT_POSITIVE",
                                 "cost constants must be > 0"))
    if cc.rand_page_cost < cc.seq_page_cost:
        out.append(Violation("cost_constants", "RAND_PAGE_BELOW_SEQ",
                             "rand_page_cost must be >= seq_page_cost"))
    if snapshot.page_size <= 0:
        out.append(Violation("page_size", "PAGE_SIZE_POSITIVE", "page_size must be > 0"))

    for tname, table in snapshot.tables.items():
        tpath = f"tables.{tname}"
        seen = set()
        for col in table.columns:
            lowered = col.name.lower()
            if lowered in seen:
                out.append(Violation(f"{tpath}.columns.{col.name}", "DUPLICATE_COLUMN",
                                     "column names must be unique (case-insensitive)"))
            seen.add(lowered)
            if col.data_type not in DATA_TYPES:
                out.append(Violation(f"{tpath}.columns.{col.name}", "UNKNOWN_DATA_TYPE",
                                     f"data_type {col.data_type!r} not in {DATA_TYPES}"))
        col_names = set(table.column_names())
        for idx in table.indexes:
            ipath = f"{tpath}.indexes.{idx.name}"
            if not idx.columns:
                out.append(Violation(ipath, "INDEX_NO_COLUMNS", "index has no columns"))
            if len(set(idx.columns)) != len(idx.columns):
                out.append(Violation(ipath, "INDEX_DUPLICATE_COLUMN",
                                     "index columns must be distinct"))
            for c in idx.columns:
                if c not in col_names:
                    out.append(Violation(ipath, "INDEX_UNKNOWN_COLUMN",
                                         f"index references unknown column {c!r}"))
            if idx.table != tname:
                out.append(Violation(ipath, "INDEX_TABLE_MISMATCH",
                                     f"index declares table {idx.table!r}"))
        out.extend(_validate_table_stats(snapshot, tname, table))
    return out


def _validate_table_stats(snapshot: CatalogSnapshot, tname: str,
                          table: TableDef) -> Iterable[Violation]:
    out: list[Violation] = []
    stats = table.stats
    tpath = f"tables.{tname}"
    if stats.row_count < 0:
        out.append(Violation(f"{tpath}.row_count", "ROW_COUNT_NEGATIVE",
                             "row_count must be >= 0"))
    if stats.data_size_bytes < 0:
        out.append(Violation(f"{tpath}.data_size_bytes", "DATA_SIZE_NEGATIVE",
                             "data_size_bytes must be >= 0"))
    expected_pages = math.ceil(stats.data_size_bytes / snapshot.page_size)
    if stats.page_count != expected_pages:
        out.append(Violation(f"{tpath}.page_count", "PAGE_COUNT_MISMATCH",
                             f"page_count {stats.page_count} != "
                             f"ceil(data_size_bytes / page_size) = {expected_pages}"))
    col_types = {c.name: c.data_type for c in table.columns}
    for cname, cs in stats.column_stats.items():
        cpath = f"{tpath}.column_stats.{cname}"
        if cname not in col_types:
            out.append(Violation(cpath, "STATS_UNKNOWN_COLUMN",
                                 f"statistics for unknown column {cname!r}"))
            continue
        dtype = col_types[cname]
        if cs.ndv < 0:
            out.append(Violation(cpath, "NDV_NEGATIVE", "ndv must be >= 0"))
        if cs.ndv > stats.row_count:
            out.append(Violation(cpath, "NDV_EXCEEDS_ROWS",
                                 f"ndv {cs.ndv} exceeds row_count {stats.row_count}"))
        if not 0.0 <= cs.null_fraction <= 1.0:
            out.append(Violation(cpath, "NULL_FRACTION_RANGE",
                                 f"null_fraction {cs.null_fraction} outside [0, 1]"))
        for bound, value in (("min", cs.min_value), ("max", cs.max_value)):
            if value is not None and not _value_matches_type(dtype, value):
                out.append(Violation(f"{cpath}.{bound}", "SCALAR_TYPE",
                                     f"{bound} value {value!r} does not match column "
                                     f"type {dtype!r}"))
        if (cs.min_value is not None and cs.max_value is not None
                and _comparable(cs.min_value, cs.max_value)
                and cs.min_value > cs.max_value):
            out.append(Violation(cpath, "MIN_MAX_ORDER",
                                 f"min {cs.min_value!r} > max {cs.max_value!r}"))
        if cs.histogram is not None:
            out.extend(_validate_histogram(cs, cpath))
    if stats.sample is not None:
        spath = f"{tpath}.sample"
        if stats.sample.size != len(stats.sample.rows):
            out.append(Violation(spath, "SAMPLE_SIZE_MISMATCH",
                                 f"declared size {stats.sample.size} != "
                                 f"{len(stats.sample.rows)} rows"))
        if stats.sample.size > stats.row_count:
            out.append(Violation(spath, "SAMPLE_EXCEEDS_ROWS",
                                 f"sample size {stats.sample.size} exceeds row_count "
                                 f"{stats.row_count}"))
        if stats.sample.size > SAMPLE_CAP:
            out.append(Violation(spath, "SAMPLE_EXCEEDS_CAP",
                                 f"sample size {stats.sample.size} exceeds cap {SAMPLE_CAP}"))
        arity = len(table.columns)
        for i, row in enumerate(stats.sample.rows):
            if len(row) != arity:
                out.append(Violation(f"{spath}.rows[{i}]", "SAMPLE_ARITY",
                                     f"row has {len(row)} values, schema has {arity}"))
                break
    return out


def _validate_histogram(cs: ColumnStatistics, cpath: str) -> Iterable[Violation]:
    out: list[Violation] = []
    hist = cs.histogram
    hpath = f"{cpath}.histogram"
    prev_upper = None
    for i, b in enumerate(hist.buckets):
        bpath = f"{hpath}.buckets[{i}]"
        if _comparable(b.lower, b.upper) and b.lower > b.upper:
            out.append(Violation(bpath, "HISTOGRAM_BUCKET_ORDER",
                                 f"lower {b.lower!r} > upper {b.upper!r}"))
        if prev_upper is not None and _comparable(prev_upper, b.lower) \
                and b.lower < prev_upper:
            out.append(Violation(bpath, "HISTOGRAM_ORDER",
                                 "bucket bounds must be non-decreasing"))
        prev_upper = b.upper
        if b.row_fraction <= 0:
            out.append(Violation(bpath, "HISTOGRAM_FRACTION_POSITIVE",
                                 f"row_fraction {b.row_fraction} must be > 0"))
        if b.distinct_count < 1:
            out.append(Violation(bpath, "HISTOGRAM_DISTINCT_COUNT",
                                 f"distinct_count {b.distinct_count} must be >= 1"))
        if cs.min_value is not None and _comparable(b.lower, cs.min_value) \
                and b.lower < cs.min_value:
            out.append(Violation(bpath, "HISTOGRAM_BOUNDS",
                                 f"bucket lower {b.lower!r} below min {cs.min_value!r}"))
        if cs.max_value is not None and _comparable(b.upper, cs.max_value) \
                and b.upper > cs.max_value:
            out.append(Violation(bpath, "HISTOGRAM_BOUNDS",
                                 f"bucket upper {b.upper!r} above max {cs.max_value!r}"))
    if hist.buckets:
        total = hist.total_fraction()
        if abs(total - 1.0) > FRACTION_SUM_TOL:
            out.append(Violation(hpath, "HISTOGRAM_FRACTION_SUM",
                                 f"bucket fractions sum to {total!r}, expected 1"))
    return out


def _comparable(a: Any, b: Any) -> bool:
    num = (int, float)
    if isinstance(a, num) and isinstance(b, num):
        return not isinstance(a, bool) and not isinstance(b, bool)
    return isinstance(a, str) and isinstance(b, str)


# --------------------------------------------------------------------------
# serialization

def serialize_metadata(snapshot: CatalogSnapshot) -> bytes:
    """Canonical UTF-8 JSON: sorted keys, tables sorted by name.

    Byte-identical output for equal snapshots regardless of construction
    order.
    """
    doc = snapshot_to_doc(snapshot)
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode()


def snapshot_to_doc(snapshot: CatalogSnapshot) -> dict:
    return {
        "format_version": snapshot.format_version,
        "page_size": snapshot.page_size,
        "cost_constants": {
            "seq_page_cost": snapshot.cost_constants.seq_page_cost,
            "rand_page_cost": snapshot.cost_constants.rand_page_cost,
            "row_cpu_cost": snapshot.cost_constants.row_cpu_cost,
            "index_row_cost": snapshot.cost_constants.index_row_cost,
        },
        "tables": [_table_to_doc(t) for _, t in sorted(snapshot.tables.items())],
    }


def _table_to_doc(table: TableDef) -> dict:
    stats = table.stats
    doc = {
        "name": table.name,
        "columns": [
            {"name": c.name, "type": c.data_type, "nullable": c.nullable}
            for c in table.columns
        ],
        "indexes": [
            {"name": i.name, "columns": list(i.columns), "unique": i.unique}
            for i in sorted(table.indexes, key=lambda i: i.name)
        ],
        "row_count": stats.row_count,
        "data_size_bytes": stats.data_size_bytes,
        "page_count": stats.page_count,
        "column_stats": {
            cname: _column_stats_to_doc(table, cname, cs)
            for cname, cs in stats.column_stats.items()
        },
    }
    if stats.sample is not None:
        doc["sample"] = {
            "seed": stats.sample.seed,
            "size": stats.sample.size,
            "rows": [list(row) for row in stats.sample.rows],
        }
    return doc


def _column_stats_to_doc(table: TableDef, cname: str, cs: ColumnStatistics) -> dict:
    col = table.column(cname)
    dtype = col.data_type if col else "int"
    doc = {
        "ndv": cs.ndv,
        "null_fraction": cs.null_fraction,
        "min": encode_scalar(dtype, cs.min_value),
        "max": encode_scalar(dtype, cs.max_value),
    }
    if cs.histogram is not None:
        doc["histogram"] = {
            "buckets": [
                {
                    "lower": encode_scalar(dtype, b.lower),
                    "upper": encode_scalar(dtype, b.upper),
                    "row_fraction": b.row_fraction,
                    "distinct_count": b.distinct_count,
                }
                for b in cs.histogram.buckets
            ]
        }
    return doc


def snapshot_digest(snapshot: CatalogSnapshot) -> str:
    """Content digest of the canonical document; keys model/task caches."""
    return hashlib.sha256(serialize_metadata(snapshot)).hexdigest()


# --------------------------------------------------------------------------
# parsing

def load_metadata(source: Union[bytes, str, IO]) -> CatalogSnapshot:
    """Parse and validate a metadata document.

    Raises MetadataParseError (with a document path) on malformed input and
    MetadataValidationError carrying *all* invariant violations, not just
    the first.
    """
    raw = source.read() if hasattr(source, "read") else source
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MetadataParseError(f"invalid JSON: {exc}", "$") from exc
    snapshot = snapshot_from_doc(doc)
    violations = validate_snapshot(snapshot)
    if violations:
        raise MetadataValidationError(violations)
    return snapshot


def snapshot_from_doc(doc: Any) -> CatalogSnapshot:
    """Structural parse of an already-decoded document (no validation)."""
    if not isinstance(doc, dict):
        raise MetadataParseError("document root must be an object", "$")
    version = _req(doc, "format_version", int, "$")
    if version != FORMAT_VERSION:
        raise MetadataParseError(
            f"unknown format_version {version}; supported: {FORMAT_VERSION}",
            "$.format_version")
    page_size = _req(doc, "page_size", int, "$")
    cc_doc = _req(doc, "cost_constants", dict, "$")
    constants = CostConstants(
        seq_page_cost=_num(cc_doc, "seq_page_cost", "$.cost_constants"),
        rand_page_cost=_num(cc_doc, "rand_page_cost", "$.cost_constants"),
        row_cpu_cost=_num(cc_doc, "row_cpu_cost", "$.cost_constants"),
        index_row_cost=_num(cc_doc, "index_row_cost", "$.cost_constants"),
    )
    tables_doc = _req(doc, "tables", list, "$")
    tables: dict[str, TableDef] = {}
    for i, tdoc in enumerate(tables_doc):
        table = _table_from_doc(tdoc, f"$.tables[{i}]")
        if table.name in tables:
            raise MetadataParseError(f"duplicate table {table.name!r}", f"$.tables[{i}]")
        tables[table.name] = table
    return CatalogSnapshot(format_version=version, page_size=page_size,
                           cost_constants=constants, tables=tables)


def _table_from_doc(tdoc: Any, path: str) -> TableDef:
    if not isinstance(tdoc, dict):
        raise MetadataParseError("table entry must be an object", path)
    name = _req(tdoc, "name", str, path)
    columns = []
    for j, cdoc in enumerate(_req(tdoc, "columns", list, path)):
        cpath = f"{path}.columns[{j}]"
        if not isinstance(cdoc, dict):
            raise MetadataParseError("column entry must be an object", cpath)
        columns.append(ColumnDef(
            name=_req(cdoc, "name", str, cpath),
            data_type=_req(cdoc, "type", str, cpath),
            nullable=_req(cdoc, "nullable", bool, cpath),
        ))
    col_types = {c.name: c.data_type for c in columns}
    indexes = []
    for j, idoc in enumerate(tdoc.get("indexes", [])):
        ipath = f"{path}.indexes[{j}]"
        if not isinstance(idoc, dict):
            raise MetadataParseError("index entry must be an object", ipath)
        cols = _req(idoc, "columns", list, ipath)
        if not all(isinstance(c, str) for c in cols):
            raise MetadataParseError("index columns must be strings", ipath)
        indexes.append(IndexDef(
            name=_req(idoc, "name", str, ipath),
            table=name,
            columns=tuple(cols),
            unique=bool(idoc.get("unique", False)),
        ))
    row_count = _req(tdoc, "row_count", int, path)
    data_size = _req(tdoc, "data_size_bytes", int, path)
    page_count = _req(tdoc, "page_count", int, path)
    column_stats: dict[str, ColumnStatistics] = {}
    for cname, sdoc in _req(tdoc, "column_stats", dict, path).items():
        column_stats[cname] = _column_stats_from_doc(
            sdoc, col_types.get(cname), f"{path}.column_stats.{cname}")
    sample = None
    if tdoc.get("sample") is not None:
        sample = _sample_from_doc(tdoc["sample"], columns, f"{path}.sample")
    return TableDef(
        name=name,
        columns=tuple(columns),
        indexes=tuple(indexes),
        stats=TableStatistics(
            row_count=row_count,
            data_size_bytes=data_size,
            page_count=page_count,
            column_stats=column_stats,
            sample=sample,
        ),
    )


def _column_stats_from_doc(sdoc: Any, dtype: Optional[str],
                           path: str) -> ColumnStatistics:
    if not isinstance(sdoc, dict):
        raise MetadataParseError("column_stats entry must be an object", path)
    minv = maxv = None
    if sdoc.get("min") is not None:
        _, minv = decode_scalar(sdoc["min"], f"{path}.min")
    if sdoc.get("max") is not None:
        _, maxv = decode_scalar(sdoc["max"], f"{path}.max")
    histogram = None
    if sdoc.get("histogram") is not None:
        hdoc = sdoc["histogram"]
        if not isinstance(hdoc, dict):
            raise MetadataParseError("histogram must be an object", f"{path}.histogram")
        buckets = []
        for k, bdoc in enumerate(_req(hdoc, "buckets", list, f"{path}.histogram")):
            bpath = f"{path}.histogram.buckets[{k}]"
            if not isinstance(bdoc, dict):
                raise MetadataParseError("bucket must be an object", bpath)
            _, lower = decode_scalar(_req(bdoc, "lower", dict, bpath), f"{bpath}.lower")
            _, upper = decode_scalar(_req(bdoc, "upper", dict, bpath), f"{bpath}.upper")
            buckets.append(HistogramBucket(
                lower=lower,
                upper=upper,
                row_fraction=_num(bdoc, "row_fraction", bpath),
                distinct_count=_req(bdoc, "distinct_count", int, bpath),
            ))
        histogram = EquiDepthHistogram(buckets=tuple(buckets))
    return ColumnStatistics(
        ndv=_req(sdoc, "ndv", int, path),
        null_fraction=_num(sdoc, "null_fraction", path),
        min_value=minv,
        max_value=maxv,
        histogram=histogram,
    )


def _sample_from_doc(sdoc: Any, columns: list[ColumnDef], path: str) -> Sample:
    if not isinstance(sdoc, dict):
        raise MetadataParseError("sample must be an object", path)
    rows = []
    for i, rdoc in enumerate(_req(sdoc, "rows", list, path)):
        rpath = f"{path}.rows[{i}]"
        if not isinstance(rdoc, list):
            raise MetadataParseError("sample row must be an array", rpath)
        if len(rdoc) == len(columns):
            for col, value in zip(columns, rdoc):
                if value is not None and not _value_matches_type(col.data_type, value):
                    raise MetadataParseError(
                        f"value {value!r} does not match column {col.name!r} "
                        f"type {col.data_type!r}", rpath)
        rows.append(tuple(
            float(v) if
            (col.data_type == "float" and isinstance(v, int) and not isinstance(v, bool))
            else v
            for col, v in zip(columns, rdoc)
        ) if len(rdoc) == len(columns) else tuple(rdoc))
    return Sample(
        seed=_req(sdoc, "seed", int, path),
        size=_req(sdoc, "size", int, path),
        rows=tuple(rows),
    )


def _req(obj: dict, key: str, typ: type, path: str):
    if key not in obj:
        raise MetadataParseError(f"missing required field {key!r}", path)
    value = obj[key]
    if typ is int and isinstance(value, bool):
        raise MetadataParseError(f"field {key!r} must be an integer", f"{path}.{key}")
    if not isinstance(value, typ):
        raise MetadataParseError(
            f"field {key!r} must be {typ.__name__}, got {type(value).__name__}",
            f"{path}.{key}")
    return value


def _num(obj: dict, key: str, path: str) -> float:
    if key not in obj:
        raise MetadataParseError(f"missing required field {key!r}", path)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MetadataParseError(f"field {key!r} must be a number", f"{path}.{key}")
    return float(value)
