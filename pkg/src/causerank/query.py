"""Declarative mini-language for defining feature families from records.

One statement groups matching records into named families and aggregates
their values:

    FAMILY BY name WHERE metric GLOB 'disk*' SELECT avg(value)
    FAMILY BY concat(tag('service'), split(tag('host'), '-')[0]) SELECT avg(value)
    FAMILY BY name SELECT avg(lag(value, 1)) RANGE 0..1439

Grouping by ``name`` keys families by metric name; grouping by ``tag('k')``
renders keys in the ``*{k=v}`` form (missing tags render as NULL).  Results
from several statements are unioned into one family table; every family
shares a single time grid, with gaps filled from the nearest observation.
"""

from __future__ import annotations

import fnmatch
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .ingest import interpolate_points
from .model import (
    CauseRankError,
    FamilyTable,
    FeatureFamily,
    Hypothesis,
    MetricRecord,
    TimeIndex,
    validate_hypothesis,
)

log = logging.getLogger(__name__)

AGGREGATES = ("avg", "max", "min", "sum", "count", "percentile")
KEYWORDS = {"family", "by", "where", "select", "and", "or", "not", "in", "glob", "range", "step"}


class QuerySyntaxError(CauseRankError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class UnknownFunction(CauseRankError):
    def __init__(self, name: str, line: int, col: int):
        super().__init__(f"unknown function {name!r} (line {line}, column {col})")
        self.name = name


class DuplicateFamilyKey(CauseRankError):
    def __init__(self, key: str):
        super().__init__(f"family {key!r} defined by more than one query")
        self.key = key


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NameRef:
    """The metric name (spelled ``name`` or ``metric``)."""


@dataclass(frozen=True)
class TagRef:
    key: str


@dataclass(frozen=True)
class LiteralStr:
    text: str


@dataclass(frozen=True)
class Concat:
    args: tuple


@dataclass(frozen=True)
class SplitIndex:
    arg: object
    sep: str
    index: int


GroupExpr = Union[NameRef, TagRef, LiteralStr, Concat, SplitIndex]


@dataclass(frozen=True)
class Cmp:
    lhs: GroupExpr
    op: str  # '=', 'glob', 'in'
    rhs: tuple[str, ...]


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Not:
    item: object


@dataclass(frozen=True)
class SelectItem:
    fn: str
    lag: int = 0
    q: Optional[float] = None  # percentile rank in [0, 100]

    def label(self) -> str:
        arg = "value" if self.lag == 0 else f"lag(value,{self.lag})"
        if self.fn == "percentile":
            return f"percentile({arg},{_fmt_number(self.q)})"
        return f"{self.fn}({arg})"


@dataclass(frozen=True)
class QueryAst:
    group_by: tuple
    select: tuple
    where: Optional[object] = None
    range_: Optional[tuple[int, int, int]] = None  # (start, end, step)


def _fmt_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # ident, string, number, symbol, eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("--", i):  # comment to end of line
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c == "'":
            j = text.find("'", i + 1)
            if j < 0:
                raise QuerySyntaxError("unterminated string", line, start_col)
            tokens.append(_Token("string", text[i + 1 : j], line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                # '..' is the range separator, not part of a number
                if text.startswith("..", j):
                    break
                j += 1
            tokens.append(_Token("number", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if text.startswith("..", i):
            tokens.append(_Token("symbol", "..", line, start_col))
            i += 2
            col += 2
            continue
        if c in "()[],=;":
            tokens.append(_Token("symbol", c, line, start_col))
            i += 1
            col += 1
            continue
        raise QuerySyntaxError(f"unexpected character {c!r}", line, start_col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def error(self, message: str) -> QuerySyntaxError:
        t = self.peek()
        return QuerySyntaxError(message, t.line, t.col)

    def is_kw(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text.lower() == word

    def expect_kw(self, word: str) -> None:
        if not self.is_kw(word):
            raise self.error(f"expected {word.upper()}")
        self.next()

    def expect_symbol(self, sym: str) -> None:
        t = self.peek()
        if t.kind != "symbol" or t.text != sym:
            raise self.error(f"expected {sym!r}")
        self.next()

    def expect_string(self) -> str:
        t = self.peek()
        if t.kind != "string":
            raise self.error("expected a string literal")
        return self.next().text

    def expect_int(self) -> int:
        t = self.peek()
        if t.kind != "number" or "." in t.text:
            raise self.error("expected an integer")
        return int(self.next().text)

    def statement(self) -> QueryAst:
        self.expect_kw("family")
        self.expect_kw("by")
        group = [self.group_expr()]
        while self.peek().kind == "symbol" and self.peek().text == ",":
            self.next()
            group.append(self.group_expr())
        where = None
        if self.is_kw("where"):
            self.next()
            where = self.predicate()
        self.expect_kw("select")
        select = [self.select_item()]
        while self.peek().kind == "symbol" and self.peek().text == ",":
            self.next()
            select.append(self.select_item())
        range_ = None
        if self.is_kw("range"):
            self.next()
            start = self.expect_int()
            self.expect_symbol("..")
            end = self.expect_int()
            step = 1
            if self.is_kw("step"):
                self.next()
                step = self.expect_int()
            range_ = (start, end, step)
        return QueryAst(group_by=tuple(group), select=tuple(select), where=where, range_=range_)

    def group_expr(self) -> GroupExpr:
        t = self.peek()
        if t.kind == "string":
            return LiteralStr(self.next().text)
        if t.kind != "ident":
            raise self.error("expected a grouping expression")
        word = t.text.lower()
        if word in ("name", "metric"):
            self.next()
            return NameRef()
        if word == "tag":
            self.next()
            self.expect_symbol("(")
            key = self.expect_string()
            self.expect_symbol(")")
            return TagRef(key)
        if word == "concat":
            self.next()
            self.expect_symbol("(")
            args = [self.group_expr()]
            while self.peek().kind == "symbol" and self.peek().text == ",":
                self.next()
                args.append(self.group_expr())
            self.expect_symbol(")")
            return Concat(tuple(args))
        if word == "split":
            self.next()
            self.expect_symbol("(")
            arg = self.group_expr()
            self.expect_symbol(",")
            sep = self.expect_string()
            self.expect_symbol(")")
            self.expect_symbol("[")
            idx = self.expect_int()
            self.expect_symbol("]")
            return SplitIndex(arg, sep, idx)
        raise UnknownFunction(t.text, t.line, t.col)

    def predicate(self):
        return self.or_expr()

    def or_expr(self):
        items = [self.and_expr()]
        while self.is_kw("or"):
            self.next()
            items.append(self.and_expr())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def and_expr(self):
        items = [self.unary()]
        while self.is_kw("and"):
            self.next()
            items.append(self.unary())
        return items[0] if len(items) == 1 else And(tuple(items))

    def unary(self):
        if self.is_kw("not"):
            self.next()
            return Not(self.unary())
        if self.peek().kind == "symbol" and self.peek().text == "(":
            self.next()
            p = self.predicate()
            self.expect_symbol(")")
            return p
        return self.comparison()

    def comparison(self) -> Cmp:
        lhs = self.group_expr()
        t = self.peek()
        if t.kind == "symbol" and t.text == "=":
            self.next()
            return Cmp(lhs, "=", (self.expect_string(),))
        if self.is_kw("glob"):
            self.next()
            pattern = self.expect_string()
            try:
                fnmatch.translate(pattern)
            except Exception:
                raise self.error(f"bad glob pattern {pattern!r}") from None
            return Cmp(lhs, "glob", (pattern,))
        if self.is_kw("in"):
            self.next()
            self.expect_symbol("(")
            items = [self.expect_string()]
            while self.peek().kind == "symbol" and self.peek().text == ",":
                self.next()
                items.append(self.expect_string())
            self.expect_symbol(")")
            return Cmp(lhs, "in", tuple(items))
        raise self.error("expected =, GLOB or IN")

    def select_item(self) -> SelectItem:
        t = self.peek()
        if t.kind != "ident":
            raise self.error("expected an aggregate function")
        fn = t.text.lower()
        if fn not in AGGREGATES:
            raise UnknownFunction(t.text, t.line, t.col)
        self.next()
        self.expect_symbol("(")
        lag = 0
        if self.is_kw("lag"):
            self.next()
            self.expect_symbol("(")
            self.expect_kw("value")
            self.expect_symbol(",")
            lag = self.expect_int()
            if lag < 0:
                raise self.error("lag offset must be >= 0")
            self.expect_symbol(")")
        else:
            self.expect_kw("value")
        q = None
        if fn == "percentile":
            self.expect_symbol(",")
            tok = self.peek()
            if tok.kind != "number":
                raise self.error("percentile rank expected")
            q = float(self.next().text)
            if not (0.0 <= q <= 100.0):
                raise self.error("percentile rank must be in [0, 100]")
        self.expect_symbol(")")
        return SelectItem(fn=fn, lag=lag, q=q)


def parse_query(text: str) -> QueryAst:
    """Parse one statement into its AST."""
    parser = _Parser(_tokenize(text))
    ast = parser.statement()
    t = parser.peek()
    if t.kind == "symbol" and t.text == ";":
        parser.next()
        t = parser.peek()
    if t.kind != "eof":
        raise parser.error("trailing input after statement")
    return ast


def parse_query_file(text: str) -> list[QueryAst]:
    """Parse a UTF-8 query file: statements separated by ';', '--' comments."""
    parser = _Parser(_tokenize(text))
    out = []
    while parser.peek().kind != "eof":
        out.append(parser.statement())
        if parser.peek().kind == "symbol" and parser.peek().text == ";":
            parser.next()
    return out


# ---------------------------------------------------------------------------
# Pretty printer (canonical form; parse(pretty(ast)) == ast)
# ---------------------------------------------------------------------------


def _print_expr(e: GroupExpr) -> str:
    if isinstance(e, NameRef):
        return "name"
    if isinstance(e, TagRef):
        return f"tag('{e.key}')"
    if isinstance(e, LiteralStr):
        return f"'{e.text}'"
    if isinstance(e, Concat):
        return "concat(" + ", ".join(_print_expr(a) for a in e.args) + ")"
    if isinstance(e, SplitIndex):
        return f"split({_print_expr(e.arg)}, '{e.sep}')[{e.index}]"
    raise TypeError(f"not a group expression: {e!r}")


def _print_pred(p, parent: str = "or") -> str:
    if isinstance(p, Cmp):
        if p.op == "=":
            return f"{_print_expr(p.lhs)} = '{p.rhs[0]}'"
        if p.op == "glob":
            return f"{_print_expr(p.lhs)} GLOB '{p.rhs[0]}'"
        return _print_expr(p.lhs) + " IN (" + ", ".join(f"'{s}'" for s in p.rhs) + ")"
    if isinstance(p, Not):
        inner = _print_pred(p.item, "not")
        return f"NOT {inner}"
    if isinstance(p, And):
        body = " AND ".join(_print_pred(i, "and") for i in p.items)
        return f"({body})" if parent == "not" else body
    if isinstance(p, Or):
        body = " OR ".join(_print_pred(i, "or") for i in p.items)
        return f"({body})" if parent in ("and", "not") else body
    raise TypeError(f"not a predicate: {p!r}")


def pretty(ast: QueryAst) -> str:
    parts = ["FAMILY BY " + ", ".join(_print_expr(g) for g in ast.group_by)]
    if ast.where is not None:
        parts.append("WHERE " + _print_pred(ast.where))
    parts.append("SELECT " + ", ".join(i.label() for i in ast.select))
    if ast.range_ is not None:
        start, end, step = ast.range_
        r = f"RANGE {start}..{end}"
        if step != 1:
            r += f" STEP {step}"
        parts.append(r)
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class QueryRow:
    ts: int
    name: str  # family key
    values: dict[str, float]  # feature name -> value


@dataclass
class QueryResult:
    rows: list[QueryRow]
    # feature name -> underlying series key, per family (needed for the
    # metric-overlap check when features are derived)
    feature_metrics: dict[str, dict[str, str]]

    def family_keys(self) -> list[str]:
        return sorted(self.feature_metrics)


def _eval_expr(e: GroupExpr, r: MetricRecord, top_level: bool) -> str:
    if isinstance(e, NameRef):
        return r.metric
    if isinstance(e, TagRef):
        raw = r.tags.get(e.key, "NULL")
        return f"*{{{e.key}={raw}}}" if top_level else raw
    if isinstance(e, LiteralStr):
        return e.text
    if isinstance(e, Concat):
        return "".join(_eval_expr(a, r, False) for a in e.args)
    if isinstance(e, SplitIndex):
        parts = _eval_expr(e.arg, r, False).split(e.sep)
        return parts[e.index] if 0 <= e.index < len(parts) else "NULL"
    raise TypeError(f"not a group expression: {e!r}")


def _eval_pred(p, r: MetricRecord) -> bool:
    if isinstance(p, Cmp):
        lhs = _eval_expr(p.lhs, r, False)
        if p.op == "=":
            return lhs == p.rhs[0]
        if p.op == "glob":
            return fnmatch.fnmatchcase(lhs, p.rhs[0])
        return lhs in p.rhs
    if isinstance(p, Not):
        return not _eval_pred(p.item, r)
    if isinstance(p, And):
        return all(_eval_pred(i, r) for i in p.items)
    if isinstance(p, Or):
        return any(_eval_pred(i, r) for i in p.items)
    raise TypeError(f"not a predicate: {p!r}")


_AGG_FNS = {
    "avg": np.mean,
    "max": np.max,
    "min": np.min,
    "sum": np.sum,
    "count": len,
}


def _aggregate(fn: str, values: list[float], q: Optional[float]) -> float:
    if fn == "percentile":
        return float(np.percentile(values, q))
    return float(_AGG_FNS[fn](values))


def evaluate_query(
    ast: QueryAst, records: list[MetricRecord], index: TimeIndex
) -> QueryResult:
    """Evaluate one statement over records restricted to the index range.

    Produces one row per (ts, family key) with a feature-name -> value map.
    Observations sharing (series, ts) are combined by the aggregate; a
    LAG(k) item shifts its series back k grid steps, repeating the first
    value over the first k slots.
    """
    single = len(ast.select) == 1
    # (family, feature) -> {ts: [values]}
    buckets: dict[tuple[str, str], dict[int, list[float]]] = {}
    feature_metrics: dict[str, dict[str, str]] = {}
    for r in records:
        if not (index.start_ts <= r.ts <= index.end_ts):
            continue
        if ast.where is not None and not _eval_pred(ast.where, r):
            continue
        fam = ",".join(_eval_expr(g, r, True) for g in ast.group_by)
        series = r.series_key
        for item in ast.select:
            feature = series if single else f"{series}:{item.label()}"
            buckets.setdefault((fam, feature), {}).setdefault(r.ts, []).append(r.value)
            feature_metrics.setdefault(fam, {})[feature] = series

    if not buckets:
        log.warning("query produced no rows: %s", pretty(ast))
        return QueryResult(rows=[], feature_metrics={})

    by_item = {item.label(): item for item in ast.select}
    rows_map: dict[tuple[int, str], dict[str, float]] = {}
    for (fam, feature), per_ts in buckets.items():
        item = ast.select[0]
        if not single:
            item = by_item[feature.rsplit(":", 1)[1]]
        points = sorted((ts, _aggregate(item.fn, vals, item.q)) for ts, vals in per_ts.items())
        if item.lag > 0:
            dense = interpolate_points(points, index, feature)
            k = min(item.lag, len(dense))
            shifted = np.concatenate([np.repeat(dense[0], k), dense[: len(dense) - k]])
            points = list(zip(index.timestamps().tolist(), shifted.tolist()))
        for ts, v in points:
            rows_map.setdefault((ts, fam), {})[feature] = v

    rows = [
        QueryRow(ts=ts, name=fam, values=dict(sorted(vals.items())))
        for (ts, fam), vals in sorted(rows_map.items())
    ]
    return QueryResult(rows=rows, feature_metrics=feature_metrics)


def union_results(results: list[QueryResult]) -> QueryResult:
    """Concatenate results; a family key defined by two inputs is an error."""
    rows: list[QueryRow] = []
    feature_metrics: dict[str, dict[str, str]] = {}
    for res in results:
        for fam in res.feature_metrics:
            if fam in feature_metrics:
                raise DuplicateFamilyKey(fam)
        feature_metrics.update(res.feature_metrics)
        rows.extend(res.rows)
    rows.sort(key=lambda r: (r.ts, r.name))
    return QueryResult(rows=rows, feature_metrics=feature_metrics)


def build_family_table(result: QueryResult, index: TimeIndex, provenance: str = "") -> FamilyTable:
    """Materialise a QueryResult as dense per-family matrices on the grid."""
    points: dict[str, dict[str, list[tuple[int, float]]]] = {}
    for row in result.rows:
        fam_points = points.setdefault(row.name, {})
        for feature, v in row.values.items():
            fam_points.setdefault(feature, []).append((row.ts, v))
    families = []
    for fam in sorted(points):
        names = tuple(sorted(points[fam]))
        cols = [interpolate_points(sorted(points[fam][f]), index, f) for f in names]
        metrics = tuple(result.feature_metrics[fam][f] for f in names)
        families.append(
            FeatureFamily(
                family_key=fam,
                feature_names=names,
                matrix=np.column_stack(cols),
                provenance=provenance,
                metrics=metrics,
            )
        )
    return FamilyTable(index, families)


def generate_hypotheses(
    table: FamilyTable,
    target: str,
    condition: list[str] | tuple[str, ...] = (),
    search: list[str] | None = None,
) -> tuple[list[Hypothesis], dict[str, str]]:
    """One hypothesis per search family, excluding target/condition/overlaps.

    ``search`` is a list of family keys or glob patterns (None means all
    families).  Families that fail validation are excluded with a reason,
    never raised.  Returns (hypotheses, exclusions).
    """
    table[target]  # raises UnknownFamily
    condition = tuple(condition)
    for key in condition:
        table[key]

    if search is None:
        candidates = table.keys()
    else:
        candidates = []
        for key in table.keys():
            if any(fnmatch.fnmatchcase(key, pat) for pat in search):
                candidates.append(key)

    hypotheses: list[Hypothesis] = []
    exclusions: dict[str, str] = {}
    for key in candidates:
        if key == target:
            exclusions[key] = "target"
            continue
        if key in condition:
            exclusions[key] = "conditioning family"
            continue
        h = Hypothesis(x=key, y=target, z=condition)
        try:
            validate_hypothesis(h, table)
        except CauseRankError as e:
            exclusions[key] = str(e)
            continue
        hypotheses.append(h)
    return hypotheses, exclusions
