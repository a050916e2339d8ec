"""Lite-query grammar and evaluation.

A query is a single name component such as ``tem.val_gt_25_limit_10_dsc``:
``task.field``, a comparator, one operand (two for ``bet``, joined by
``and``), then optional ``limit_N``, an order keyword and an aggregate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .names import GeoCoord

COMPARATORS = ("gt", "lt", "lte", "eq", "neq", "in", "bet")
FIELDS = ("nid", "date", "time", "val")
ORDERS = {"asc": "asc", "dsc": "dsc", "desc": "dsc"}
AGGREGATES = ("count", "avg", "min", "max", "sel")
MAX_TASK_LEN = 3
MAX_FIELD_LEN = 4

Operand = Union[int, float, str]


class QueryError(ValueError):
    pass


class BadTaskLength(QueryError):
    pass


class BadFieldLength(QueryError):
    pass


class UnknownComparator(QueryError):
    pass


class MissingOperand(QueryError):
    pass


class ConflictingModifiers(QueryError):
    pass


@dataclass(frozen=True)
class LiteQuery:
    task: str
    field: str
    comparator: str
    operand1: Operand
    operand2: Optional[Operand] = None
    limit: Optional[int] = None
    order: Optional[str] = None
    aggregate: Optional[str] = None

    def render(self) -> str:
        parts = [f"{self.task}.{self.field}", self.comparator, _fmt(self.operand1)]
        if self.operand2 is not None:
            parts += ["and", _fmt(self.operand2)]
        if self.limit is not None:
            parts += ["limit", str(self.limit)]
        if self.order is not None:
            parts.append(self.order)
        if self.aggregate is not None:
            parts.append(self.aggregate)
        return "_".join(parts)

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Sample:
    nid: str
    task: str
    epoch_time: int
    value: float
    location: Optional[GeoCoord] = None


@dataclass(frozen=True)
class QueryResult:
    kind: str  # "rows" | "scalar" | "boolean"
    rows: tuple[Sample, ...] = ()
    scalar: Optional[float] = None
    boolean: Optional[bool] = None

    @property
    def is_empty(self) -> bool:
        """True for an aggregate over zero matches (no scalar defined)."""
        return self.kind == "scalar" and self.scalar is None


def _fmt(v: Operand) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return repr(v) if isinstance(v, float) else str(v)


def _number(tok: str) -> Union[int, float]:
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        v = float(tok)
    except ValueError:
        raise MissingOperand(f"expected a number, got {tok!r}") from None
    if v != v or v in (float("inf"), float("-inf")):
        raise MissingOperand(f"operand {tok!r} is not finite")
    return v


def parse_query(text: str) -> LiteQuery:
    if not text:
        raise QueryError("empty query")
    toks = text.split("_")
    head = toks[0]
    if head.count(".") != 1:
        raise QueryError(f"first component must be task.field, got {head!r}")
    task, fld = head.split(".")
    if not task or len(task) > MAX_TASK_LEN or not task.isalpha():
        raise BadTaskLength(f"task {task!r} must be 1..{MAX_TASK_LEN} letters")
    if not fld or len(fld.encode()) > MAX_FIELD_LEN:
        raise BadFieldLength(f"field {fld!r} must be 1..{MAX_FIELD_LEN} bytes")
    if fld not in FIELDS:
        raise BadFieldLength(f"unknown field {fld!r}")
    if len(toks) < 2:
        raise UnknownComparator("missing comparator")
    cmp = toks[1]
    if cmp not in COMPARATORS:
        raise UnknownComparator(f"unknown comparator {cmp!r}")
    if fld == "nid" and cmp not in ("eq", "neq"):
        raise UnknownComparator(f"field nid supports eq/neq only, not {cmp!r}")
    if len(toks) < 3 or not toks[2]:
        raise MissingOperand(f"{cmp} needs an operand")
    conv = str if fld == "nid" else _number
    op1 = conv(toks[2])
    op2 = None
    i = 3
    if cmp == "bet":
        if len(toks) < 5 or toks[3] != "and":
            raise MissingOperand("bet needs '<lo>_and_<hi>'")
        op2 = conv(toks[4])
        i = 5
    limit = order = agg = None
    while i < len(toks):
        t = toks[i]
        if t == "limit":
            if limit is not None:
                raise ConflictingModifiers("limit given twice")
            if i + 1 >= len(toks) or not toks[i + 1].isdigit() or int(toks[i + 1]) < 1:
                raise MissingOperand("limit needs a positive integer")
            limit = int(toks[i + 1])
            i += 2
            continue
        if t in ORDERS:
            if order is not None:
                raise ConflictingModifiers("order given twice")
            order = ORDERS[t]
        elif t in AGGREGATES:
            if agg is not None:
                raise ConflictingModifiers(f"two aggregates: {agg!r} and {t!r}")
            agg = t
        else:
            raise QueryError(f"unknown keyword {t!r}")
        i += 1
    if cmp == "in" and (agg is not None or limit is not None or order is not None):
        raise ConflictingModifiers("'in' yields a boolean and takes no modifiers")
    return LiteQuery(task, fld, cmp, op1, op2, limit, order, agg)


def is_query(text: str) -> bool:
    try:
        parse_query(text)
    except QueryError:
        return False
    return True


def field_value(s: Sample, fld: str) -> Operand:
    if fld == "val":
        return s.value
    if fld == "nid":
        return s.nid
    return s.epoch_time


def _matches(q: LiteQuery, v: Operand) -> bool:
    a, b = q.operand1, q.operand2
    c = q.comparator
    if c == "gt":
        return v > a
    if c == "lt":
        return v < a
    if c == "lte":
        return v <= a
    if c in ("eq", "in"):
        return v == a
    if c == "neq":
        return v != a
    if c == "bet":
        lo, hi = (a, b) if a <= b else (b, a)
        return lo <= v <= hi
    raise UnknownComparator(c)


def eval_query(q: LiteQuery, store: Sequence[Sample]) -> QueryResult:
    hits = [s for s in store if s.task == q.task and _matches(q, field_value(s, q.field))]
    if q.comparator == "in":
        return QueryResult("boolean", boolean=bool(hits))
    # stable tie-break for equal keys
    hits.sort(key=lambda s: (s.epoch_time, s.nid))
    if q.order is not None:
        hits.sort(key=lambda s: field_value(s, q.field), reverse=(q.order == "dsc"))
    if q.limit is not None:
        hits = hits[: q.limit]
    agg = q.aggregate
    if agg == "count":
        return QueryResult("scalar", scalar=len(hits))
    if agg in ("avg", "min", "max"):
        if not hits:
            return QueryResult("scalar")
        vals = [s.value for s in hits]
        if agg == "avg":
            return QueryResult("scalar", scalar=sum(vals) / len(vals))
        return QueryResult("scalar", scalar=min(vals) if agg == "min" else max(vals))
    return QueryResult("rows", rows=tuple(hits))


def pack_result(r: QueryResult, budget: int) -> tuple[bytes, int]:
    """Serialize a result into at most ``budget`` bytes.

    Returns the payload and the number of content objects it carries: one
    for a scalar or boolean, the number of rows that fit otherwise.
    """
    from . import wire

    if r.kind == "scalar":
        return wire.encode_scalar(r.scalar), 1
    if r.kind == "boolean":
        return wire.encode_boolean(bool(r.boolean)), 1
    if not r.rows:
        return b"", 0
    n = wire.rows_that_fit(r.rows, budget)
    if n == 0:
        return b"", 0
    return wire.encode_rows(r.rows[:n]), n
