"""Statistics collection from raw tabular data.

Plays the production-database role at desk scale: given real rows, computes
everything that goes into a metadata document -- exact row counts and NDV,
equi-depth histograms, a deterministic size model, and a bounded reservoir
sample. All operations are pure functions over immutable inputs.

Raw data comes from a directory of ``<table>.csv`` files with sidecar
``<table>.schema.json`` files (same shape as the metadata document's table
schema). Empty CSV fields are NULL; dates are ISO ``YYYY-MM-DD``.
"""

from __future__ import annotations

import csv
import datetime
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .catalog import (
    SAMPLE_CAP,
    CatalogSnapshot,
    ColumnDef,
    ColumnStatistics,
    CostConstants,
    EquiDepthHistogram,
    HistogramBucket,
    IndexDef,
    Sample,
    TableDef,
    TableStatistics,
)
from .errors import VidexError

DEFAULT_BUCKET_COUNT = 32
DEFAULT_SEED = 42
_EPOCH = datetime.date(1970, 1, 1)

# Deterministic encoded-width model, bytes per non-null value.
_FIXED_WIDTHS = {"int": 8, "float": 8, "date": 4}


class CollectorError(VidexError):
    pass


@dataclass(frozen=True)
class CollectConfig:
    bucket_count: int = DEFAULT_BUCKET_COUNT
    sample_cap: int = SAMPLE_CAP
    page_size: int = 16384
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class DataTable:
    """Schema plus raw rows; the stand-in for a production table."""

    name: str
    schema: tuple[ColumnDef, ...]
    rows: tuple[tuple, ...] = ()
    indexes: tuple[IndexDef, ...] = ()

    def __post_init__(self):
        arity = len(self.schema)
        for i, row in enumerate(self.rows):
            if len(row) != arity:
                raise CollectorError(
                    f"table {self.name!r} row {i} has {len(row)} values, "
                    f"schema has {arity}")

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.schema):
            if col.name == name:
                return i
        raise CollectorError(f"unknown column {name!r} in table {self.name!r}")

    def column_values(self, name: str) -> list:
        i = self.column_index(name)
        return [row[i] for row in self.rows]


def parse_date(text: str) -> int:
    """ISO date string to epoch days."""
    return (datetime.date.fromisoformat(text) - _EPOCH).days


def format_date(days: int) -> str:
    return (_EPOCH + datetime.timedelta(days=days)).isoformat()


def build_equi_depth_histogram(values: Iterable, bucket_count: int) -> EquiDepthHistogram:
    """Split a sorted multiset into <= bucket_count near-equal-count buckets.

    A single value never splits across buckets: when an ideal boundary falls
    inside a run of duplicates, the current bucket extends to the run's end.
    Fractions always sum to 1; the empty multiset yields an empty histogram.
    """
    if bucket_count < 1:
        raise CollectorError(f"bucket_count must be >= 1, got {bucket_count}")
    vals = sorted(values)
    n = len(vals)
    if n == 0:
        return EquiDepthHistogram()
    buckets = []
    start = 0
    for j in range(1, bucket_count + 1):
        if start >= n:
            break
        end = max(start + 1, round(n * j / bucket_count))
        if j == bucket_count:
            end = n
        while end < n and vals[end] == vals[end - 1]:
            end += 1
        chunk = vals[start:end]
        buckets.append(HistogramBucket(
            lower=chunk[0],
            upper=chunk[-1],
            row_fraction=len(chunk) / n,
            distinct_count=_distinct_count_sorted(chunk),
        ))
        start = end
    return EquiDepthHistogram(buckets=tuple(buckets))


def _distinct_count_sorted(chunk: Sequence) -> int:
    count = 1
    for a, b in zip(chunk, chunk[1:]):
        if a != b:
            count += 1
    return count


def exact_ndv(data: DataTable, columns: Sequence[str]) -> int:
    """Exact count of distinct non-all-null tuples over the given columns.

    This is the ground-truth oracle the estimation models are judged against.
    """
    idxs = [data.column_index(c) for c in columns]
    seen = set()
    for row in data.rows:
        t = tuple(row[i] for i in idxs)
        if all(v is None for v in t):
            continue
        seen.add(t)
    return len(seen)


def reservoir_sample(data: DataTable, cap: int, seed: int) -> Sample:
    """Uniform sample of min(cap, rows) rows, single-pass Algorithm R.

    Deterministic for a fixed seed; when the table fits, the sample is the
    whole table in original row order.
    """
    if cap < 1:
        raise CollectorError(f"sample cap must be >= 1, got {cap}")
    rng = random.Random(seed)
    reservoir: list[tuple] = []
    for i, row in enumerate(data.rows):
        if i < cap:
            reservoir.append(row)
        else:
            j = rng.randrange(i + 1)
            if j < cap:
                reservoir[j] = row
    return Sample(seed=seed, size=len(reservoir), rows=tuple(reservoir))


def measure_data_size(data: DataTable) -> int:
    """Encoded-width size model: fixed widths per type, strings byte length + 1."""
    total = 0
    for col_pos, col in enumerate(data.schema):
        if col.data_type == "string":
            for row in data.rows:
                v = row[col_pos]
                if v is not None:
                    total += len(v.encode("utf-8")) + 1
        else:
            width = _FIXED_WIDTHS[col.data_type]
            non_null = sum(1 for row in data.rows if row[col_pos] is not None)
            total += width * non_null
    return total


def collect_table_stats(data: DataTable,
                        config: CollectConfig = CollectConfig()) -> TableStatistics:
    """All per-table statistics for the metadata document, computed exactly."""
    if config.bucket_count < 1:
        raise CollectorError(f"bucket_count must be >= 1, got {config.bucket_count}")
    if config.sample_cap < 1:
        raise CollectorError(f"sample_cap must be >= 1, got {config.sample_cap}")
    row_count = len(data.rows)
    column_stats = {}
    for pos, col in enumerate(data.schema):
        values = [row[pos] for row in data.rows]
        non_null = [v for v in values if v is not None]
        column_stats[col.name] = ColumnStatistics(
            ndv=len(set(non_null)),
            null_fraction=(row_count - len(non_null)) / row_count if row_count else 0.0,
            min_value=min(non_null) if non_null else None,
            max_value=max(non_null) if non_null else None,
            histogram=build_equi_depth_histogram(non_null, config.bucket_count),
        )
    data_size = measure_data_size(data)
    cap = min(config.sample_cap, SAMPLE_CAP)
    return TableStatistics(
        row_count=row_count,
        data_size_bytes=data_size,
        page_count=math.ceil(data_size / config.page_size),
        column_stats=column_stats,
        sample=reservoir_sample(data, cap, config.seed),
    )


def collect_snapshot(tables: Sequence[DataTable],
                     config: CollectConfig = CollectConfig()) -> CatalogSnapshot:
    """The full metadata replica for a set of tables."""
    table_defs = {}
    for data in tables:
        table_defs[data.name] = TableDef(
            name=data.name,
            columns=data.schema,
            indexes=data.indexes,
            stats=collect_table_stats(data, config),
        )
    return CatalogSnapshot(page_size=config.page_size, cost_constants=CostConstants(),
                           tables=table_defs)


# --------------------------------------------------------------------------
# CSV loading

def load_data_dir(path: str | Path) -> list[DataTable]:
    """Read every ``<table>.csv`` + ``<table>.schema.json`` pair in a directory."""
    root = Path(path)
    if not root.is_dir():
        raise CollectorError(f"data directory not found: {root}")
    tables = []
    for schema_file in sorted(root.glob("*.schema.json")):
        name = schema_file.name[:-len(".schema.json")]
        csv_file = root / f"{name}.csv"
        if not csv_file.exists():
            raise CollectorError(f"missing CSV for table {name!r}: {csv_file}")
        tables.append(load_csv_table(name, schema_file, csv_file))
    if not tables:
        raise CollectorError(f"no *.schema.json files found in {root}")
    return tables


def load_csv_table(name: str, schema_file: Path, csv_file: Path) -> DataTable:
    sdoc = json.loads(schema_file.read_text())
    columns = tuple(
        ColumnDef(name=c["name"], data_type=c["type"], nullable=c.get("nullable", True))
        for c in sdoc["columns"])
    indexes = tuple(
        IndexDef(name=i["name"], table=name, columns=tuple(i["columns"]),
                 unique=bool(i.get("unique", False)))
        for i in sdoc.get("indexes", []))
    rows = []
    with open(csv_file, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return DataTable(name=name, schema=columns, rows=(), indexes=indexes)
        expected = [c.name for c in columns]
        if header != expected:
            raise CollectorError(
                f"{csv_file}: header {header} does not match schema columns {expected}")
        for lineno, record in enumerate(reader, start=2):
            if len(record) != len(columns):
                raise CollectorError(
                    f"{csv_file}:{lineno}: expected {len(columns)} fields, "
                    f"got {len(record)}")
            rows.append(tuple(
                _parse_field(col, text, csv_file, lineno)
                for col, text in zip(columns, record)))
    return DataTable(name=name, schema=columns, rows=tuple(rows), indexes=indexes)


def _parse_field(col: ColumnDef, text: str, csv_file: Path, lineno: int):
    if text == "":
        return None
    try:
        if col.data_type == "int":
            return int(text)
        if col.data_type == "float":
            return float(text)
        if col.data_type == "date":
            return parse_date(text)
        return text
    except ValueError as exc:
        raise CollectorError(
            f"{csv_file}:{lineno}: column {col.name!r}: {exc}") from exc


def write_data_dir(tables: Sequence[DataTable], path: str | Path) -> None:
    """Inverse of load_data_dir; used to materialize synthetic datasets."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for data in tables:
        schema_doc = {
            "name": data.name,
            "columns": [
                {"name": c.name, "type": c.data_type, "nullable": c.nullable}
                for c in data.schema
            ],
            "indexes": [
                {"name": i.name, "columns": list(i.columns), "unique": i.unique}
                for i in data.indexes
            ],
        }
        (root / f"{data.name}.schema.json").write_text(
            json.dumps(schema_doc, indent=2) + "\n")
        with open(root / f"{data.name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([c.name for c in data.schema])
            for row in data.rows:
                writer.writerow([
                    "" if v is None else
                    (format_date(v) if col.data_type == "date" else v)
                    for col, v in zip(data.schema, row)
                ])
