import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from videx.catalog import ColumnDef, IndexDef
from videx.collector import CollectConfig, DataTable, collect_snapshot


@pytest.fixture(scope="session")
def uniform_table():
    """1000 rows; a uniform 1..100 (10x each), b uniform 1..10 (100x each)."""
    rows = tuple(((i % 100) + 1, (i % 10) + 1, i) for i in range(1000))
    return DataTable(
        name="t",
        schema=(ColumnDef("a", "int", False),
                ColumnDef("b", "int", False),
                ColumnDef("c", "int", False)),
        rows=rows,
        indexes=(IndexDef("idx_ab", "t", ("a", "b"), False),))


@pytest.fixture(scope="session")
def uniform_snapshot(uniform_table):
    return collect_snapshot([uniform_table],
                            CollectConfig(bucket_count=4, sample_cap=100_000))
