"""BLTLc formulas: syntax tree, parser, desugaring and whole-trace semantics.

Concrete syntax (loosest binding first)::

    formula := until ('|' until)*
    until   := conj ('U' interval? until)?          # right-associative
    conj    := unary ('&' unary)*
    unary   := '!' unary | ('X'|'F'|'G') interval? unary | '(' formula ')' | atom
    atom    := expr ('<'|'<='|'>='|'>'|'=='|'!=') expr
    interval:= '[' NUMBER ',' (NUMBER | 'inf') (']' | ')')

``X``, ``U``, ``F``, ``G`` and ``inf`` are reserved and cannot name species.
An omitted interval means ``[0, inf)``.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from typing import Collection, Union

from .expr import (
    Expression, Num, ParseError, TokenStream, UnknownIdentifierError,
    evaluate_expression, parse_expr, to_text as expr_text,
)
from .ssa import Trace

__all__ = [
    "Interval", "Atom", "Not", "And", "Or", "Next", "Until", "Finally", "Globally",
    "Formula", "TRUE_ATOM", "parse_formula", "desugar_formula", "check_trace_offline",
    "formula_text", "COMPARATORS", "formula_horizon",
]

INF = math.inf


@dataclass(frozen=True)
class Interval:
    lower: float = 0.0
    upper: float = INF

    def __post_init__(self):
        if not (0 <= self.lower <= self.upper):
            raise ValueError(f"bad interval [{self.lower}, {self.upper}]")

    def __contains__(self, t: float) -> bool:
        return self.lower <= t <= self.upper

    def __str__(self):
        if self.upper == INF:
            return f"[{_num(self.lower)},inf)"
        return f"[{_num(self.lower)},{_num(self.upper)}]"


UNBOUNDED = Interval()

COMPARATORS = {
    "<": operator.lt, "<=": operator.le, ">=": operator.ge,
    ">": operator.gt, "==": operator.eq, "!=": operator.ne,
}


@dataclass(frozen=True)
class Atom:
    lhs: Expression
    op: str
    rhs: Expression


@dataclass(frozen=True)
class Not:
    sub: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Next:
    interval: Interval
    sub: "Formula"


@dataclass(frozen=True)
class Until:
    interval: Interval
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Finally:
    interval: Interval
    sub: "Formula"


@dataclass(frozen=True)
class Globally:
    interval: Interval
    sub: "Formula"


Formula = Union[Atom, Not, And, Or, Next, Until, Finally, Globally]

TRUE_ATOM = Atom(Num(0.0), "<=", Num(0.0))

_RESERVED = {"X", "U", "F", "G", "inf"}


# ---------------------------------------------------------------------------
# parser

def parse_formula(text: str, symbols: Collection[str] | None = None) -> Formula:
    if not text or not text.strip():
        raise ParseError("empty formula", 0, text)
    ts = TokenStream(text)
    f = _formula(ts, symbols)
    if ts.peek.kind != "END":
        ts.error("unexpected trailing input")
    return f


def _formula(ts, symbols):
    left = _until(ts, symbols)
    while ts.accept("|"):
        left = Or(left, _until(ts, symbols))
    return left


def _until(ts, symbols):
    left = _conj(ts, symbols)
    if ts.peek.kind == "NAME" and ts.peek.text == "U":
        ts.advance()
        interval = _interval(ts)
        return Until(interval, left, _until(ts, symbols))
    return left


def _conj(ts, symbols):
    left = _unary(ts, symbols)
    while ts.accept("&"):
        left = And(left, _unary(ts, symbols))
    return left


def _unary(ts, symbols):
    if ts.accept("!"):
        return Not(_unary(ts, symbols))
    tok = ts.peek
    if tok.kind == "NAME" and tok.text in ("X", "F", "G"):
        ts.advance()
        interval = _interval(ts)
        sub = _unary(ts, symbols)
        return {"X": Next, "F": Finally, "G": Globally}[tok.text](interval, sub)
    if tok.text == "(" and tok.kind == "OP":
        # '(' opens either a sub-formula or an arithmetic operand of an atom
        mark = ts.mark()
        ts.advance()
        try:
            f = _formula(ts, symbols)
            ts.expect(")")
        except UnknownIdentifierError:
            raise
        except ParseError:
            ts.reset(mark)
            return _atom(ts, symbols)
        if ts.peek.kind == "OP" and (ts.peek.text in COMPARATORS or ts.peek.text in "+-*/"):
            ts.reset(mark)
            return _atom(ts, symbols)
        return f
    return _atom(ts, symbols)


def _check_names(e: Expression, ts, tok):
    from .expr import variables
    for v in variables(e):
        if v.name in _RESERVED:
            raise ParseError(f"reserved word {v.name!r} used as a variable", tok.pos, ts.text)


def _atom(ts, symbols):
    tok = ts.peek
    lhs = parse_expr(ts, symbols)
    op = ts.peek
    if op.kind != "OP" or op.text not in COMPARATORS:
        ts.error("expected a comparison operator")
    ts.advance()
    rhs = parse_expr(ts, symbols)
    _check_names(lhs, ts, tok)
    _check_names(rhs, ts, tok)
    return Atom(lhs, op.text, rhs)


def _bound(ts) -> float:
    tok = ts.peek
    if tok.kind == "NUM":
        ts.advance()
        return float(tok.text)
    if tok.kind == "NAME" and tok.text == "inf":
        ts.advance()
        return INF
    ts.error("expected a time bound")


def _interval(ts) -> Interval:
    if not ts.accept("["):
        return UNBOUNDED
    start = ts.peek
    lo = _bound(ts)
    ts.expect(",")
    hi = _bound(ts)
    if not (ts.accept("]") or (hi == INF and ts.accept(")"))):
        ts.error("expected ']' closing the interval")
    try:
        return Interval(lo, hi)
    except ValueError as exc:
        raise ParseError(str(exc), start.pos, ts.text) from None


# ---------------------------------------------------------------------------
# printing

def _num(v: float) -> str:
    return str(int(v)) if v == int(v) else repr(v)


def formula_text(f: Formula) -> str:
    """Fully parenthesised concrete syntax; ``parse_formula`` inverts it."""
    if isinstance(f, Atom):
        return f"{expr_text(f.lhs)} {f.op} {expr_text(f.rhs)}"
    if isinstance(f, Not):
        return f"!({formula_text(f.sub)})"
    if isinstance(f, And):
        return f"({formula_text(f.left)}) & ({formula_text(f.right)})"
    if isinstance(f, Or):
        return f"({formula_text(f.left)}) | ({formula_text(f.right)})"
    iv = "" if f.interval == UNBOUNDED else str(f.interval)
    if isinstance(f, Until):
        return f"({formula_text(f.left)}) U{iv} ({formula_text(f.right)})"
    name = {Next: "X", Finally: "F", Globally: "G"}[type(f)]
    return f"{name}{iv} ({formula_text(f.sub)})"


# ---------------------------------------------------------------------------
# desugaring

def formula_horizon(f: Formula) -> float:
    """Longest time span any evaluation of ``f`` at position 0 can inspect.

    Infinite as soon as an unbounded temporal operator occurs.
    """
    if isinstance(f, Atom):
        return 0.0
    if isinstance(f, Not):
        return formula_horizon(f.sub)
    if isinstance(f, (And, Or)):
        return max(formula_horizon(f.left), formula_horizon(f.right))
    if isinstance(f, (Next, Finally, Globally)):
        return f.interval.upper + formula_horizon(f.sub)
    return f.interval.upper + max(formula_horizon(f.left), formula_horizon(f.right))


def desugar_formula(f: Formula) -> Formula:
    """Rewrite F and G into Until: ``F φ = tt U φ``, ``G φ = !(tt U !φ)``."""
    if isinstance(f, Atom):
        return f
    if isinstance(f, Not):
        return Not(desugar_formula(f.sub))
    if isinstance(f, And):
        return And(desugar_formula(f.left), desugar_formula(f.right))
    if isinstance(f, Or):
        return Or(desugar_formula(f.left), desugar_formula(f.right))
    if isinstance(f, Next):
        return Next(f.interval, desugar_formula(f.sub))
    if isinstance(f, Until):
        return Until(f.interval, desugar_formula(f.left), desugar_formula(f.right))
    if isinstance(f, Finally):
        return Until(f.interval, TRUE_ATOM, desugar_formula(f.sub))
    if isinstance(f, Globally):
        return Not(Until(f.interval, TRUE_ATOM, Not(desugar_formula(f.sub))))
    raise TypeError(f"not a formula: {f!r}")


def eval_atom(a: Atom, env, params) -> bool:
    return COMPARATORS[a.op](evaluate_expression(a.lhs, env, params),
                             evaluate_expression(a.rhs, env, params))


# ---------------------------------------------------------------------------
# offline semantics

def check_trace_offline(f: Formula, trace: Trace, i: int = 0, *,
                        species: list[str], params=None) -> bool:
    """Does the suffix of ``trace`` starting at position ``i`` satisfy ``f``?

    Finite-trace convention: an Until without a witness inside the trace,
    and a Next at the last position, are false.  Until's clock restarts
    at ``i``.
    """
    params = params or {}
    if not 0 <= i < len(trace):
        raise IndexError(f"position {i} outside trace of length {len(trace)}")
    envs: dict[int, dict] = {}

    def env(k):
        e = envs.get(k)
        if e is None:
            e = envs[k] = dict(zip(species, trace.states[k]))
        return e

    def sat(g, k) -> bool:
        if isinstance(g, Atom):
            return eval_atom(g, env(k), params)
        if isinstance(g, Not):
            return not sat(g.sub, k)
        if isinstance(g, And):
            return sat(g.left, k) and sat(g.right, k)
        if isinstance(g, Or):
            return sat(g.left, k) or sat(g.right, k)
        if isinstance(g, Next):
            if k + 1 >= len(trace):
                return False
            return trace.elapsed(k, k + 1) in g.interval and sat(g.sub, k + 1)
        if isinstance(g, Until):
            for m in range(k, len(trace)):
                e = trace.elapsed(k, m)
                if e > g.interval.upper:
                    return False
                if e in g.interval and sat(g.right, m):
                    return True
                if not sat(g.left, m):
                    return False
            return False
        if isinstance(g, Finally):
            for m in range(k, len(trace)):
                e = trace.elapsed(k, m)
                if e > g.interval.upper:
                    break
                if e in g.interval and sat(g.sub, m):
                    return True
            return False
        if isinstance(g, Globally):
            for m in range(k, len(trace)):
                e = trace.elapsed(k, m)
                if e > g.interval.upper:
                    break
                if e in g.interval and not sat(g.sub, m):
                    return False
            return True
        raise TypeError(f"not a formula: {g!r}")

    return sat(f, i)
