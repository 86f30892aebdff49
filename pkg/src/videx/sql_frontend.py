"""SQL parsing for the supported subset and range-condition extraction.

Grammar: SELECT-project-join queries with conjunctive single-column
predicates only::

    SELECT <*|COUNT(*)|col[, col...]>
    FROM t1 [alias] [JOIN t2 [alias] ON a.x = b.y]...
    [WHERE col <op> literal [AND ...] | col BETWEEN lo AND hi]
    [GROUP BY col[, col...]]

Anything outside the grammar (OR, subqueries, LIKE, arithmetic, IS NULL)
is rejected with an error naming the construct -- never silently
approximated. Per-table conjuncts merge into at most one range condition
per column; contradictory ranges become an EmptyRange marker that planners
map to cardinality zero.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from .catalog import CatalogSnapshot, Scalar, TableDef, encode_scalar, decode_scalar
from .collector import parse_date
from .errors import VidexError

MIN_OPERATORS = (">", ">=")
MAX_OPERATORS = ("<", "<=")


class SqlError(VidexError):
    pass


class SqlSyntaxError(SqlError):
    def __init__(self, message: str, position: int, expected: Sequence[str] = ()):
        detail = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"syntax error at position {position}: {message}{detail}")
        self.position = position
        self.expected = tuple(expected)


class UnsupportedSqlError(SqlError):
    def __init__(self, construct: str, position: int):
        super().__init__(
            f"unsupported construct at position {position}: {construct}")
        self.construct = construct
        self.position = position


class NameResolutionError(SqlError):
    pass


@dataclass(frozen=True)
class RangeCond:
    """Single-column range condition; equality is min == max with >=, <=."""

    col_name: str
    data_type: str
    min_value: Optional[Scalar] = None
    max_value: Optional[Scalar] = None
    min_operator: Optional[str] = None
    max_operator: Optional[str] = None

    def __post_init__(self):
        if self.min_value is None and self.max_value is None:
            raise ValueError("range condition needs at least one bound")
        if (self.min_value is None) != (self.min_operator is None):
            raise ValueError("min_operator present iff min_value is")
        if (self.max_value is None) != (self.max_operator is None):
            raise ValueError("max_operator present iff max_value is")
        if self.min_operator is not None and self.min_operator not in MIN_OPERATORS:
            raise ValueError(f"bad min_operator {self.min_operator!r}")
        if self.max_operator is not None and self.max_operator not in MAX_OPERATORS:
            raise ValueError(f"bad max_operator {self.max_operator!r}")
        if self.min_value is not None and self.max_value is not None:
            same_kind = isinstance(self.min_value, str) == isinstance(self.max_value, str)
            if same_kind and self.min_value > self.max_value:
                raise ValueError(
                    f"min {self.min_value!r} > max {self.max_value!r} on "
                    f"{self.col_name!r}")

    @property
    def is_equality(self) -> bool:
        return (self.min_value is not None and self.min_value == self.max_value
                and self.min_operator == ">=" and self.max_operator == "<=")

    @property
    def is_two_sided(self) -> bool:
        return self.min_value is not None and self.max_value is not None

    def matches(self, value) -> bool:
        """Exact predicate evaluation; NULL never matches."""
        if value is None:
            return False
        if self.min_value is not None:
            if self.min_operator == ">" and not value > self.min_value:
                return False
            if self.min_operator == ">=" and not value >= self.min_value:
                return False
        if self.max_value is not None:
            if self.max_operator == "<" and not value < self.max_value:
                return False
            if self.max_operator == "<=" and not value <= self.max_value:
                return False
        return True

    def to_wire(self) -> dict:
        """Wire form; field names match the estimation protocol verbatim."""
        value_type = self.data_type
        if self.data_type == "int":
            # range literals on int columns may be fractional
            if isinstance(self.min_value, float) or isinstance(self.max_value, float):
                value_type = "float"
        return {
            "col_name": self.col_name,
            "data_type": self.data_type,
            "min_value": encode_scalar(value_type, self.min_value),
            "max_value": encode_scalar(value_type, self.max_value),
            "min_operator": self.min_operator,
            "max_operator": self.max_operator,
        }

    @classmethod
    def from_wire(cls, obj: dict, path: str = "$") -> "RangeCond":
        from .errors import MetadataParseError
        if not isinstance(obj, dict):
            raise MetadataParseError("condition must be an object", path)
        col = obj.get("col_name")
        dtype = obj.get("data_type")
        if not isinstance(col, str):
            raise MetadataParseError("col_name must be a string", f"{path}.col_name")
        if not isinstance(dtype, str):
            raise MetadataParseError("data_type must be a string", f"{path}.data_type")
        minv = maxv = None
        if obj.get("min_value") is not None:
            _, minv = decode_scalar(obj["min_value"], f"{path}.min_value")
        if obj.get("max_value") is not None:
            _, maxv = decode_scalar(obj["max_value"], f"{path}.max_value")
        try:
            return cls(col_name=col, data_type=dtype,
                       min_value=minv, max_value=maxv,
                       min_operator=obj.get("min_operator"),
                       max_operator=obj.get("max_operator"))
        except ValueError as exc:
            raise MetadataParseError(str(exc), path) from exc


@dataclass(frozen=True)
class EmptyRange:
    """Marker for a contradictory (unsatisfiable) conjunction on one column."""

    col_name: str


@dataclass(frozen=True)
class ColumnRef:
    table: str  # resolved alias
    column: str


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: str


@dataclass(frozen=True)
class JoinPredicate:
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class LogicalQuery:
    """Resolved query: tables, equi-join predicates, per-table conjuncts."""

    text: str
    tables: tuple[TableRef, ...]
    join_predicates: tuple[JoinPredicate, ...]
    filters: dict[str, tuple[RangeCond, ...]]  # alias -> raw conjuncts
    projection: tuple  # ("star",) | ("count_star",) | ("columns", refs)
    group_by: tuple[ColumnRef, ...] = ()

    def table_for_alias(self, alias: str) -> TableRef:
        for t in self.tables:
            if t.alias == alias:
                return t
        raise KeyError(f"unknown table alias {alias!r}")

    def referenced_columns(self, alias: str, table: TableDef) -> frozenset[str]:
        """Columns of one table the query touches; '*' touches all."""
        if self.projection[0] == "star":
            return frozenset(table.column_names())
        cols = set()
        if self.projection[0] == "columns":
            cols.update(r.column for r in self.projection[1] if r.table == alias)
        for cond in self.filters.get(alias, ()):
            cols.add(cond.col_name)
        for pred in self.join_predicates:
            for ref in (pred.left, pred.right):
                if ref.table == alias:
                    cols.add(ref.column)
        cols.update(r.column for r in self.group_by if r.table == alias)
        return frozenset(cols)


# --------------------------------------------------------------------------
# tokenizer

_KEYWORDS = {"SELECT", "FROM", "JOIN", "ON", "WHERE", "AND", "BETWEEN",
             "GROUP", "BY", "AS", "COUNT"}
_UNSUPPORTED_KEYWORDS = {"OR", "LIKE", "IN", "IS", "NOT", "NULL", "UNION",
                         "LEFT", "RIGHT", "OUTER", "INNER", "HAVING",
                         "ORDER", "LIMIT", "EXISTS", "CASE", "DISTINCT"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>\d+\.\d+|\.\d+|\d+)
  | (?P<string>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|<>|!=|=|<|>)
  | (?P<punct>[*,().;])
  | (?P<arith>[+\-/%])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | ident | number | string | op | punct | eof
    value: str
    position: int


def tokenize(sql: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(sql):
        m = _TOKEN_RE.match(sql, pos)
        if m is None:
            raise SqlSyntaxError(f"unexpected character {sql[pos]!r}", pos)
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        text = m.group()
        if m.lastgroup == "arith":
            raise UnsupportedSqlError(f"arithmetic operator {text!r}", m.start())
        if m.lastgroup == "op" and text in ("<>", "!="):
            raise UnsupportedSqlError(f"inequality operator {text!r}", m.start())
        if m.lastgroup == "ident":
            upper = text.upper()
            if upper in _UNSUPPORTED_KEYWORDS:
                raise UnsupportedSqlError(upper, m.start())
            kind = "keyword" if upper in _KEYWORDS else "ident"
            tokens.append(Token(kind, upper if kind == "keyword" else text, m.start()))
        else:
            tokens.append(Token(m.lastgroup, text, m.start()))
    tokens.append(Token("eof", "", len(sql)))
    return tokens


# --------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, sql: str, catalog: CatalogSnapshot):
        self.sql = sql
        self.catalog = catalog
        self.tokens = tokenize(sql)
        self.pos = 0

    # token helpers
    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def accept(self, kind: str, value: Optional[str] = None) -> Optional[Token]:
        tok = self.peek()
        if tok.kind == kind and (value is None or tok.value == value):
            return self.advance()
        return None

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        tok = self.accept(kind, value)
        if tok is None:
            got = self.peek()
            want = value or kind
            raise SqlSyntaxError(f"got {got.value or 'end of input'!r}",
                                 got.position, expected=[want])
        return tok

    # grammar
    def parse(self) -> LogicalQuery:
        self.expect("keyword", "SELECT")
        projection = self.parse_projection()
        self.expect("keyword", "FROM")
        tables = [self.parse_table_ref()]
        aliases = {tables[0].alias}
        joins: list[tuple] = []
        while self.accept("keyword", "JOIN"):
            ref = self.parse_table_ref()
            if ref.alias in aliases:
                raise NameResolutionError(f"duplicate table alias {ref.alias!r}")
            aliases.add(ref.alias)
            tables.append(ref)
            self.expect("keyword", "ON")
            left = self.parse_col_ref()
            self.expect("op", "=")
            right = self.parse_col_ref()
            joins.append((left, right))
        predicates: list[tuple] = []
        if self.accept("keyword", "WHERE"):
            predicates.append(self.parse_predicate())
            while self.accept("keyword", "AND"):
                predicates.append(self.parse_predicate())
        group_by: list[tuple] = []
        if self.accept("keyword", "GROUP"):
            self.expect("keyword", "BY")
            group_by.append(self.parse_col_ref())
            while self.accept("punct", ","):
                group_by.append(self.parse_col_ref())
        self.accept("punct", ";")
        tok = self.peek()
        if tok.kind != "eof":
            if tok.kind == "punct" and tok.value == "(" or tok.kind == "keyword" \
                    and tok.value == "SELECT":
                raise UnsupportedSqlError("subquery", tok.position)
            raise SqlSyntaxError(f"trailing input {tok.value!r}", tok.position,
                                 expected=["end of input"])
        return self.resolve(tables, joins, predicates, projection, group_by)

    def parse_projection(self):
        if self.accept("punct", "*"):
            return ("star",)
        if self.accept("keyword", "COUNT"):
            self.expect("punct", "(")
            self.expect("punct", "*")
            self.expect("punct", ")")
            return ("count_star",)
        refs = [self.parse_col_ref()]
        while self.accept("punct", ","):
            refs.append(self.parse_col_ref())
        return ("columns", tuple(refs))

    def parse_table_ref(self) -> TableRef:
        tok = self.peek()
        if tok.kind == "punct" and tok.value == "(":
            raise UnsupportedSqlError("subquery", tok.position)
        name = self.expect("ident").value
        alias = name
        self.accept("keyword", "AS")
        tok = self.accept("ident")
        if tok is not None:
            alias = tok.value
        if name not in self.catalog.tables:
            raise NameResolutionError(f"unknown table {name!r}")
        return TableRef(name=name, alias=alias)

    def parse_col_ref(self) -> tuple[Optional[str], str, int]:
        tok = self.peek()
        if tok.kind == "punct" and tok.value == "(":
            raise UnsupportedSqlError("parenthesized expression", tok.position)
        first = self.expect("ident")
        if self.accept("punct", "."):
            col = self.expect("ident")
            return (first.value, col.value, first.position)
        return (None, first.value, first.position)

    def parse_predicate(self) -> tuple:
        col = self.parse_col_ref()
        tok = self.peek()
        if tok.kind == "keyword" and tok.value == "BETWEEN":
            self.advance()
            lo = self.parse_literal()
            self.expect("keyword", "AND")
            hi = self.parse_literal()
            return ("between", col, lo, hi)
        op = self.expect("op")
        lit = self.parse_literal()
        return ("cmp", col, op.value, lit)

    def parse_literal(self) -> tuple:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            if "." in tok.value:
                return ("float", float(tok.value), tok.position)
            return ("int", int(tok.value), tok.position)
        if tok.kind == "string":
            self.advance()
            return ("string", tok.value[1:-1].replace("''", "'"), tok.position)
        if tok.kind == "ident":
            raise SqlSyntaxError(f"got identifier {tok.value!r} where a literal "
                                 "is required", tok.position, expected=["literal"])
        if tok.kind == "punct" and tok.value == "(":
            nxt = self.tokens[self.pos + 1]
            construct = "subquery" if nxt.kind == "keyword" \
                and nxt.value == "SELECT" else "parenthesized expression"
            raise UnsupportedSqlError(construct, tok.position)
        raise SqlSyntaxError(f"got {tok.value or 'end of input'!r}", tok.position,
                             expected=["literal"])

    # name resolution and literal coercion
    def resolve(self, tables, joins, predicates, projection, group_by) -> LogicalQuery:
        by_alias = {t.alias: self.catalog.table(t.name) for t in tables}

        def resolve_ref(ref) -> ColumnRef:
            qualifier, column, position = ref
            if qualifier is not None:
                if qualifier not in by_alias:
                    raise NameResolutionError(
                        f"unknown table or alias {qualifier!r} at position {position}")
                if by_alias[qualifier].column(column) is None:
                    raise NameResolutionError(
                        f"unknown column {qualifier}.{column} at position {position}")
                return ColumnRef(table=qualifier, column=column)
            owners = [a for a, t in by_alias.items() if t.column(column) is not None]
            if not owners:
                raise NameResolutionError(
                    f"unknown column {column!r} at position {position}")
            if len(owners) > 1:
                raise NameResolutionError(
                    f"ambiguous column {column!r} at position {position}: "
                    f"matches {sorted(owners)}")
            return ColumnRef(table=owners[0], column=column)

        join_predicates = []
        for left, right in joins:
            lref, rref = resolve_ref(left), resolve_ref(right)
            if lref.table == rref.table:
                raise NameResolutionError(
                    f"join predicate must link two distinct tables, got "
                    f"{lref.table}.{lref.column} = {rref.table}.{rref.column}")
            join_predicates.append(JoinPredicate(left=lref, right=rref))

        filters: dict[str, list[RangeCond]] = {t.alias: [] for t in tables}
        for pred in predicates:
            if pred[0] == "between":
                _, col, lo, hi = pred
                ref = resolve_ref(col)
                dtype = by_alias[ref.table].column(ref.column).data_type
                lo_v = self.coerce(dtype, lo)
                hi_v = self.coerce(dtype, hi)
                conds = _bounded_conds(ref.column, dtype, lo_v, ">=", hi_v, "<=")
            else:
                _, col, op, lit = pred
                ref = resolve_ref(col)
                dtype = by_alias[ref.table].column(ref.column).data_type
                value = self.coerce(dtype, lit)
                if op == "=":
                    conds = _bounded_conds(ref.column, dtype, value, ">=", value, "<=")
                elif op in MIN_OPERATORS:
                    conds = [RangeCond(col_name=ref.column, data_type=dtype,
                                       min_value=value, min_operator=op)]
                else:
                    conds = [RangeCond(col_name=ref.column, data_type=dtype,
                                       max_value=value, max_operator=op)]
            filters[ref.table].extend(conds)

        if projection[0] == "columns":
            projection = ("columns", tuple(resolve_ref(r) for r in projection[1]))
        resolved_group = tuple(resolve_ref(r) for r in group_by)
        return LogicalQuery(
            text=self.sql,
            tables=tuple(tables),
            join_predicates=tuple(join_predicates),
            filters={a: tuple(conds) for a, conds in filters.items()},
            projection=projection,
            group_by=resolved_group,
        )

    def coerce(self, dtype: str, literal: tuple) -> Scalar:
        lit_type, value, position = literal
        if dtype == "int":
            if lit_type in ("int", "float"):
                return value
        elif dtype == "float":
            if lit_type in ("int", "float"):
                return float(value)
        elif dtype == "string":
            if lit_type == "string":
                return value
        elif dtype == "date":
            if lit_type == "string":
                try:
                    return parse_date(value)
                except ValueError:
                    raise SqlSyntaxError(
                        f"bad date literal {value!r} (want YYYY-MM-DD)", position) \
                        from None
        raise NameResolutionError(
            f"cannot coerce {lit_type} literal {value!r} to column type {dtype!r} "
            f"at position {position}")


def _bounded_conds(column: str, dtype: str, lo, lo_op, hi, hi_op) -> list[RangeCond]:
    """Two-sided condition, or two one-sided halves when lo > hi so the merge
    step reports the contradiction as an EmptyRange."""
    try:
        return [RangeCond(col_name=column, data_type=dtype,
                          min_value=lo, min_operator=lo_op,
                          max_value=hi, max_operator=hi_op)]
    except ValueError:
        return [
            RangeCond(col_name=column, data_type=dtype, min_value=lo,
                      min_operator=lo_op),
            RangeCond(col_name=column, data_type=dtype, max_value=hi,
                      max_operator=hi_op),
        ]


def parse(sql: str, catalog: CatalogSnapshot) -> LogicalQuery:
    """Parse and resolve a statement; see module docstring for the grammar."""
    return _Parser(sql, catalog).parse()


# --------------------------------------------------------------------------
# condition merging

def extract_range_conditions(query: LogicalQuery, table: str) \
        -> list[Union[RangeCond, EmptyRange]]:
    """Per-column merged conditions for one table, sorted by column name.

    Conjuncts on the same column intersect into a single RangeCond; an
    unsatisfiable intersection yields an EmptyRange marker instead.
    """
    if table not in query.filters:
        raise KeyError(f"table {table!r} not in query")
    return merge_conditions(query.filters[table])


def merge_conditions(conds: Sequence[RangeCond]) -> list[Union[RangeCond, EmptyRange]]:
    by_col: dict[str, list[RangeCond]] = {}
    for cond in conds:
        by_col.setdefault(cond.col_name, []).append(cond)
    out: list[Union[RangeCond, EmptyRange]] = []
    for col in sorted(by_col):
        out.append(_intersect(col, by_col[col]))
    return out


def _intersect(col: str, conds: list[RangeCond]) -> Union[RangeCond, EmptyRange]:
    # bounds as (value, strict); None means unbounded
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None
    dtype = conds[0].data_type
    for cond in conds:
        if cond.min_value is not None:
            cand = (cond.min_value, cond.min_operator == ">")
            if lo is None or _tighter_low(cand, lo):
                lo = cand
        if cond.max_value is not None:
            cand = (cond.max_value, cond.max_operator == "<")
            if hi is None or _tighter_high(cand, hi):
                hi = cand
    if lo is not None and hi is not None:
        if lo[0] > hi[0] or (lo[0] == hi[0] and (lo[1] or hi[1])):
            return EmptyRange(col_name=col)
    return RangeCond(
        col_name=col, data_type=dtype,
        min_value=lo[0] if lo else None,
        min_operator=(">" if lo[1] else ">=") if lo else None,
        max_value=hi[0] if hi else None,
        max_operator=("<" if hi[1] else "<=") if hi else None,
    )


def _tighter_low(cand: tuple, cur: tuple) -> bool:
    return cand[0] > cur[0] or (cand[0] == cur[0] and cand[1] and not cur[1])


def _tighter_high(cand: tuple, cur: tuple) -> bool:
    return cand[0] < cur[0] or (cand[0] == cur[0] and cand[1] and not cur[1])
