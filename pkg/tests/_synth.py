"""Synthetic datasets and workloads shared by tests.

The standard fixture is a three-table database (users / orders / items)
with uniform, independent columns and realistic key NDVs: primary keys are
unique, foreign keys draw uniformly from the parent key space. Queries are
conjunctive SPJ statements over the FK join graph with filters on the
metric columns.
"""

from __future__ import annotations

import random

from videx.catalog import ColumnDef, IndexDef
from videx.collector import DataTable

CITIES = [f"city_{i:02d}" for i in range(40)]


def make_users(n: int, rng: random.Random) -> DataTable:
    rows = tuple(
        (i,
         rng.randrange(18, 80),
         round(rng.uniform(0, 100), 6),
         CITIES[rng.randrange(len(CITIES))])
        for i in range(n))
    return DataTable(
        name="users",
        schema=(ColumnDef("u_id", "int", False),
                ColumnDef("u_age", "int", False),
                ColumnDef("u_score", "float", False),
                ColumnDef("u_city", "string", False)),
        rows=rows,
        indexes=(IndexDef("pk_users", "users", ("u_id",), True),))


def make_orders(n: int, n_users: int, rng: random.Random) -> DataTable:
    rows = tuple(
        (i,
         rng.randrange(n_users),
         round(rng.uniform(0, 1000), 6),
         rng.randrange(365))
        for i in range(n))
    return DataTable(
        name="orders",
        schema=(ColumnDef("o_id", "int", False),
                ColumnDef("o_uid", "int", False),
                ColumnDef("o_amount", "float", False),
                ColumnDef("o_day", "int", False)),
        rows=rows,
        indexes=(IndexDef("pk_orders", "orders", ("o_id",), True),
                 IndexDef("idx_orders_uid", "orders", ("o_uid",), False)))


def make_items(n: int, n_orders: int, rng: random.Random) -> DataTable:
    rows = tuple(
        (i,
         rng.randrange(n_orders),
         round(rng.uniform(0, 500), 6),
         rng.randrange(1, 11))
        for i in range(n))
    return DataTable(
        name="items",
        schema=(ColumnDef("i_id", "int", False),
                ColumnDef("i_oid", "int", False),
                ColumnDef("i_price", "float", False),
                ColumnDef("i_qty", "int", False)),
        rows=rows,
        indexes=(IndexDef("pk_items", "items", ("i_id",), True),
                 IndexDef("idx_items_oid", "items", ("i_oid",), False)))


def make_three_table_db(seed: int = 101, scale: int = 10_000) -> list[DataTable]:
    rng = random.Random(seed)
    users = make_users(scale, rng)
    orders = make_orders(scale, scale, rng)
    items = make_items(scale, scale, rng)
    return [users, orders, items]


# filter templates per table: (column, lower bound range, width range)
_FILTERS = {
    "users": [("u_age", (18, 50), (8, 30)), ("u_score", (0, 60), (15, 40))],
    "orders": [("o_amount", (0, 600), (150, 400)), ("o_day", (0, 200), (60, 160))],
    "items": [("i_price", (0, 300), (80, 200)), ("i_qty", (1, 5), (2, 5))],
}

_JOINS = {
    ("users", "orders"): "JOIN orders ON u_id = o_uid",
    ("orders", "items"): "JOIN items ON o_id = i_oid",
}


def make_workload(count: int = 50, seed: int = 202) -> list[str]:
    """Deterministic SPJ workload over the three-table schema."""
    rng = random.Random(seed)
    queries = []
    shapes = ["single", "single", "two", "two", "three"]
    for i in range(count):
        shape = shapes[i % len(shapes)]
        if shape == "single":
            table = rng.choice(["users", "orders", "items"])
            sql = f"SELECT * FROM {table} WHERE {_filter_clause(table, rng)}"
            if rng.random() < 0.3:
                sql += f" AND {_filter_clause(table, rng)}"
        elif shape == "two":
            pair = rng.choice([("users", "orders"), ("orders", "items")])
            conds = [_filter_clause(pair[0], rng), _filter_clause(pair[1], rng)]
            sql = (f"SELECT * FROM {pair[0]} {_JOINS[pair]} "
                   f"WHERE {' AND '.join(conds)}")
        else:
            conds = [_filter_clause(t, rng)
                     for t in ("users", "orders", "items") if rng.random() < 0.8]
            where = f" WHERE {' AND '.join(conds)}" if conds else ""
            sql = ("SELECT * FROM users JOIN orders ON u_id = o_uid "
                   "JOIN items ON o_id = i_oid" + where)
        queries.append(sql)
    return queries


def _filter_clause(table: str, rng: random.Random) -> str:
    column, lo_range, width_range = rng.choice(_FILTERS[table])
    lo = rng.uniform(*lo_range)
    width = rng.uniform(*width_range)
    if column in ("u_age", "o_day", "i_qty"):
        lo, width = int(lo), max(1, int(width))
        return f"{column} BETWEEN {lo} AND {lo + width}"
    return f"{column} BETWEEN {lo:.2f} AND {lo + width:.2f}"
