"""Parser and range-condition extraction."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from videx.sql_frontend import (
    ColumnRef,
    EmptyRange,
    JoinPredicate,
    NameResolutionError,
    RangeCond,
    SqlError,
    SqlSyntaxError,
    UnsupportedSqlError,
    extract_range_conditions,
    merge_conditions,
    parse,
)


@pytest.fixture(scope="module")
def catalog():
    from videx.collector import CollectConfig, DataTable, collect_snapshot
    from videx.catalog import ColumnDef
    t = DataTable(name="t",
                  schema=(ColumnDef("a", "int", False),
                          ColumnDef("b", "float", False),
                          ColumnDef("s", "string", True),
                          ColumnDef("d", "date", True)),
                  rows=((1, 1.0, "x", 10),))
    a = DataTable(name="a",
                  schema=(ColumnDef("x", "int", False),
                          ColumnDef("z", "int", False)),
                  rows=((1, 2),))
    b = DataTable(name="b",
                  schema=(ColumnDef("y", "int", False),), rows=((1,),))
    return collect_snapshot([t, a, b], CollectConfig(bucket_count=2))


class TestParse:
    def test_range_condition(self, catalog):
        q = parse("SELECT * FROM t WHERE a >= 5 AND a < 10", catalog)
        assert q.filters["t"] == (
            RangeCond("a", "int", min_value=5, min_operator=">="),
            RangeCond("a", "int", max_value=10, max_operator="<"),
        )
        [merged] = extract_range_conditions(q, "t")
        assert merged == RangeCond("a", "int", 5, 10, ">=", "<")

    def test_equality_encoding(self, catalog):
        q = parse("SELECT * FROM t WHERE a = 7", catalog)
        [cond] = q.filters["t"]
        assert cond == RangeCond("a", "int", 7, 7, ">=", "<=")
        assert cond.is_equality

    def test_join_with_between(self, catalog):
        q = parse("SELECT * FROM a JOIN b ON a.x=b.y WHERE a.z BETWEEN 1 AND 3",
                  catalog)
        assert [t.name for t in q.tables] == ["a", "b"]
        assert q.join_predicates == (
            JoinPredicate(ColumnRef("a", "x"), ColumnRef("b", "y")),)
        assert q.filters["a"] == (RangeCond("z", "int", 1, 3, ">=", "<="),)
        assert q.filters["b"] == ()
        assert q.projection == ("star",)

    def test_aliases_and_projection(self, catalog):
        q = parse("SELECT u.x FROM a AS u JOIN b ON u.x = b.y", catalog)
        assert q.tables[0].alias == "u"
        assert q.projection == ("columns", (ColumnRef("u", "x"),))

    def test_count_star_and_group_by(self, catalog):
        q = parse("SELECT COUNT(*) FROM t GROUP BY a", catalog)
        assert q.projection == ("count_star",)
        assert q.group_by == (ColumnRef("t", "a"),)

    def test_date_literal_coercion(self, catalog):
        q = parse("SELECT * FROM t WHERE d >= '2020-01-01'", catalog)
        [cond] = q.filters["t"]
        assert cond.data_type == "date"
        assert cond.min_value == 18262  # epoch days

    def test_float_literal_on_int_column(self, catalog):
        q = parse("SELECT * FROM t WHERE a < 9.5", catalog)
        [cond] = q.filters["t"]
        assert cond.max_value == 9.5

    def test_string_coercion_failure(self, catalog):
        with pytest.raises(NameResolutionError):
            parse("SELECT * FROM t WHERE a = 'oops'", catalog)

    def test_syntax_error_position_and_expected(self, catalog):
        with pytest.raises(SqlSyntaxError) as err:
            parse("SELECT * FROM t WHERE a >", catalog)
        assert err.value.position == 25
        assert "literal" in err.value.expected

    def test_unresolved_names(self, catalog):
        with pytest.raises(NameResolutionError):
            parse("SELECT * FROM missing", catalog)
        with pytest.raises(NameResolutionError):
            parse("SELECT * FROM t WHERE nope = 1", catalog)
        with pytest.raises(NameResolutionError):
            parse("SELECT * FROM a JOIN b ON a.x = a.z", catalog)  # same table

    @pytest.mark.parametrize("sql,construct", [
        ("SELECT * FROM t WHERE a = 1 OR a = 2", "OR"),
        ("SELECT * FROM t WHERE s LIKE 'x%'", "LIKE"),
        ("SELECT * FROM t WHERE a IN (1, 2)", "IN"),
        ("SELECT * FROM t WHERE a + 1 > 2", "arithmetic"),
        ("SELECT * FROM t WHERE a != 2", "!="),
        ("SELECT * FROM t WHERE s IS NULL", "IS"),
        ("SELECT * FROM (SELECT * FROM t)", "subquery"),
    ])
    def test_unsupported_constructs_named(self, catalog, sql, construct):
        with pytest.raises(UnsupportedSqlError) as err:
            parse(sql, catalog)
        assert construct.lower() in str(err.value).lower()


class TestExtractRangeConditions:
    def test_two_lower_bounds_intersect(self, catalog):
        q = parse("SELECT * FROM t WHERE a > 1 AND a > 5", catalog)
        [cond] = extract_range_conditions(q, "t")
        assert cond == RangeCond("a", "int", min_value=5, min_operator=">")

    def test_contradiction_yields_empty(self, catalog):
        q = parse("SELECT * FROM t WHERE a > 5 AND a < 2", catalog)
        [cond] = extract_range_conditions(q, "t")
        assert cond == EmptyRange("a")

    def test_equality_shaped_intersection(self, catalog):
        q = parse("SELECT * FROM t WHERE a >= 1 AND a <= 1", catalog)
        [cond] = extract_range_conditions(q, "t")
        assert cond.is_equality

    def test_contradictory_between(self, catalog):
        q = parse("SELECT * FROM t WHERE a BETWEEN 5 AND 2", catalog)
        [cond] = extract_range_conditions(q, "t")
        assert cond == EmptyRange("a")

    def test_strict_beats_inclusive_at_same_value(self, catalog):
        q = parse("SELECT * FROM t WHERE a >= 3 AND a > 3", catalog)
        [cond] = extract_range_conditions(q, "t")
        assert cond.min_operator == ">"


# --------------------------------------------------------------------------
# properties

def _random_cond(rng: random.Random) -> RangeCond:
    lo = rng.randrange(-5, 6) if rng.random() < 0.8 else None
    hi = rng.randrange(-5, 6) if rng.random() < 0.8 else None
    if lo is None and hi is None:
        lo = 0
    if lo is not None and hi is not None and lo > hi:
        lo, hi = hi, lo
    return RangeCond(
        "a", "int",
        min_value=lo, min_operator=rng.choice([">", ">="]) if lo is not None else None,
        max_value=hi, max_operator=rng.choice(["<", "<="]) if hi is not None else None)


def _satisfies_all(value: int, conds) -> bool:
    return all(c.matches(value) for c in conds)


def _satisfies_merged(value: int, merged) -> bool:
    if isinstance(merged, EmptyRange):
        return False
    return merged.matches(value)


@given(st.integers(0, 10_000), st.integers(1, 5))
@settings(max_examples=150, deadline=None)
def test_merge_equals_brute_force_intersection(seed, count):
    rng = random.Random(seed)
    conds = [_random_cond(rng) for _ in range(count)]
    [merged] = merge_conditions(conds)
    # brute-force oracle: evaluate every candidate integer against the raw
    # conjunction and against the merged condition
    for value in range(-8, 9):
        assert _satisfies_merged(value, merged) == _satisfies_all(value, conds), \
            f"value {value}, conds {conds}, merged {merged}"


@given(st.integers(0, 10_000), st.integers(2, 5))
@settings(max_examples=100, deadline=None)
def test_merge_commutative_associative(seed, count):
    rng = random.Random(seed)
    conds = [_random_cond(rng) for _ in range(count)]
    [merged] = merge_conditions(conds)
    shuffled = conds[:]
    rng.shuffle(shuffled)
    [merged2] = merge_conditions(shuffled)
    assert merged == merged2
    # associativity: merging a merged prefix with the rest changes nothing
    [prefix] = merge_conditions(conds[:2])
    if not isinstance(prefix, EmptyRange):
        [merged3] = merge_conditions([prefix] + conds[2:])
        assert merged3 == merged


_FUZZ_BASE = "SELECT * FROM t WHERE a >= 5 AND b < 2.5 AND s = 'x'"


@given(st.integers(0, len(_FUZZ_BASE) - 1), st.characters(
    codec="ascii", exclude_categories=("Cc",)))
@settings(max_examples=300, deadline=None)
def test_mutation_fuzzing_never_crashes(position, char):
    from videx.collector import CollectConfig, DataTable, collect_snapshot
    from videx.catalog import ColumnDef
    t = DataTable(name="t",
                  schema=(ColumnDef("a", "int", False),
                          ColumnDef("b", "float", False),
                          ColumnDef("s", "string", True)),
                  rows=())
    catalog = collect_snapshot([t], CollectConfig(bucket_count=2))
    sql = _FUZZ_BASE[:position] + char + _FUZZ_BASE[position + 1:]
    try:
        parse(sql, catalog)
    except SqlError:
        pass  # structured errors only, never a crash


def test_generated_statements_always_parse(catalog):
    rng = random.Random(5)
    ops = [">", ">=", "<", "<=", "="]
    for _ in range(200):
        conds = [f"a {rng.choice(ops)} {rng.randrange(100)}"
                 for _ in range(rng.randrange(1, 4))]
        sql = "SELECT * FROM t WHERE " + " AND ".join(conds)
        q = parse(sql, catalog)
        assert len(q.filters["t"]) == len(conds)
