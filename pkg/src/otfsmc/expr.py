"""Arithmetic expressions over species counts and model parameters.

The same expression language is used for explicit propensities in a
reaction network and for the two sides of an atomic formula.  Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | primary
    primary:= NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Unary minus binds tighter than ``*``/``/``, which bind tighter than
``+``/``-``; binary operators are left-associative.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Collection, Iterable, Mapping, Sequence, Union

__all__ = [
    "Num", "Var", "BinOp", "Neg", "Call", "Expression",
    "FUNCTIONS", "ParseError", "UnknownIdentifierError", "ArityError",
    "ExpressionError", "Token", "tokenize", "TokenStream",
    "parse_expression", "evaluate_expression", "compile_expression",
    "variables", "to_text",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expression", ...]


Expression = Union[Num, Var, BinOp, Neg, Call]

# name -> arity
FUNCTIONS = {
    "pow": 2, "min": 2, "max": 2,
    "sqrt": 1, "exp": 1, "log": 1, "abs": 1, "floor": 1, "ceil": 1,
}


class ParseError(ValueError):
    """Syntax error in an expression or formula; ``pos`` is a character offset."""

    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} (at position {pos})")


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, pos: int, text: str = ""):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", pos, text)


class ArityError(ParseError):
    pass


class ExpressionError(ArithmeticError):
    """Evaluation failure; ``expr`` is the offending subexpression."""

    def __init__(self, message: str, expr: Expression):
        self.expr = expr
        super().__init__(f"{message} in {to_text(expr)}")


# ---------------------------------------------------------------------------
# tokens

@dataclass(frozen=True)
class Token:
    kind: str  # NUM, NAME, OP, END
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<NUM>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
      | (?P<NAME>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<OP><=|>=|==|!=|[-+*/(),<>!&|\[\]])
    )""",
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    n = len(text)
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.lastgroup is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(Token("END", "", n))
    return tokens


class TokenStream:
    """Cursor over a token list with backtracking via ``mark``/``reset``."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def peek(self) -> Token:
        return self.tokens[self.i]

    def lookahead(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "END":
            self.i += 1
        return tok

    def accept(self, text: str) -> Token | None:
        if self.peek.text == text and self.peek.kind != "NUM":
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            self.error(f"expected {text!r}")
        return tok

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek
        found = "end of input" if tok.kind == "END" else repr(tok.text)
        raise ParseError(f"{message}, found {found}", tok.pos, self.text)

    def mark(self) -> int:
        return self.i

    def reset(self, mark: int) -> None:
        self.i = mark


# ---------------------------------------------------------------------------
# parsing

def parse_expression(text: str, symbols: Collection[str] | None = None) -> Expression:
    """Parse ``text`` into an expression AST.

    If ``symbols`` is given every variable must be one of its names,
    otherwise :class:`UnknownIdentifierError` is raised.  Pass ``None``
    to defer name resolution (e.g. to collect all problems in a model).
    """
    if not text or not text.strip():
        raise ParseError("empty expression", 0, text)
    ts = TokenStream(text)
    e = parse_expr(ts, symbols)
    if ts.peek.kind != "END":
        ts.error("unexpected trailing input")
    return e


def parse_expr(ts: TokenStream, symbols: Collection[str] | None) -> Expression:
    left = _parse_term(ts, symbols)
    while ts.peek.kind == "OP" and ts.peek.text in "+-":
        op = ts.advance().text
        left = BinOp(op, left, _parse_term(ts, symbols))
    return left


def _parse_term(ts, symbols):
    left = _parse_factor(ts, symbols)
    while ts.peek.kind == "OP" and ts.peek.text in ("*", "/"):
        op = ts.advance().text
        left = BinOp(op, left, _parse_factor(ts, symbols))
    return left


def _parse_factor(ts, symbols):
    if ts.accept("-"):
        return Neg(_parse_factor(ts, symbols))
    return _parse_primary(ts, symbols)


def _parse_primary(ts, symbols):
    tok = ts.peek
    if tok.kind == "NUM":
        ts.advance()
        return Num(float(tok.text))
    if tok.kind == "NAME":
        ts.advance()
        if ts.peek.text == "(":
            if tok.text not in FUNCTIONS:
                raise ParseError(f"unknown function {tok.text!r}", tok.pos, ts.text)
            ts.advance()
            args = [parse_expr(ts, symbols)]
            while ts.accept(","):
                args.append(parse_expr(ts, symbols))
            ts.expect(")")
            arity = FUNCTIONS[tok.text]
            if len(args) != arity:
                raise ArityError(
                    f"{tok.text}() takes {arity} argument(s), got {len(args)}",
                    tok.pos, ts.text,
                )
            return Call(tok.text, tuple(args))
        if symbols is not None and tok.text not in symbols:
            raise UnknownIdentifierError(tok.text, tok.pos, ts.text)
        return Var(tok.text)
    if ts.accept("("):
        e = parse_expr(ts, symbols)
        ts.expect(")")
        return e
    ts.error("expected a number, name or '('")


# ---------------------------------------------------------------------------
# printing

def _fmt_num(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def to_text(e: Expression) -> str:
    """Render ``e`` in concrete syntax; ``parse_expression`` inverts it."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"-{_wrap(e.operand, 3)}"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_text(a) for a in e.args)})"
    prec = 1 if e.op in "+-" else 2
    # left-associative: the right operand needs parentheses at equal precedence
    return f"{_wrap(e.left, prec)} {e.op} {_wrap(e.right, prec + 1)}"


def _precedence(e: Expression) -> int:
    if isinstance(e, BinOp):
        return 1 if e.op in "+-" else 2
    if isinstance(e, Neg):
        return 3
    return 4


def _wrap(e: Expression, min_prec: int) -> str:
    s = to_text(e)
    return s if _precedence(e) >= min_prec else f"({s})"


def variables(e: Expression) -> Iterable[Var]:
    """Yield every variable reference in ``e`` (with repetitions)."""
    if isinstance(e, Var):
        yield e
    elif isinstance(e, BinOp):
        yield from variables(e.left)
        yield from variables(e.right)
    elif isinstance(e, Neg):
        yield from variables(e.operand)
    elif isinstance(e, Call):
        for a in e.args:
            yield from variables(a)


# ---------------------------------------------------------------------------
# evaluation

def _div(a: float, b: float, node) -> float:
    if b == 0:
        raise ExpressionError("division by zero", node)
    return a / b


def _call(name: str, args: Sequence[float], node) -> float:
    try:
        if name == "sqrt":
            if args[0] < 0:
                raise ExpressionError("sqrt of negative argument", node)
            return math.sqrt(args[0])
        if name == "log":
            if args[0] <= 0:
                raise ExpressionError("log of non-positive argument", node)
            return math.log(args[0])
        if name == "exp":
            return math.exp(args[0])
        if name == "pow":
            return math.pow(args[0], args[1])
        if name == "abs":
            return abs(args[0])
        if name == "min":
            return min(args[0], args[1])
        if name == "max":
            return max(args[0], args[1])
        if name == "floor":
            return float(math.floor(args[0]))
        if name == "ceil":
            return float(math.ceil(args[0]))
    except (ValueError, OverflowError) as exc:
        raise ExpressionError(str(exc), node) from None
    raise ExpressionError(f"unknown function {name!r}", node)


def evaluate_expression(e: Expression, state: Mapping[str, float],
                        params: Mapping[str, float] = {}) -> float:
    """Evaluate ``e`` with species counts from ``state`` and constants from ``params``.

    Species shadow parameters of the same name (validation forbids the clash).
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.name in state:
            return float(state[e.name])
        if e.name in params:
            return float(params[e.name])
        raise ExpressionError(f"unbound variable {e.name!r}", e)
    if isinstance(e, Neg):
        return -evaluate_expression(e.operand, state, params)
    if isinstance(e, Call):
        return _call(e.func, [evaluate_expression(a, state, params) for a in e.args], e)
    a = evaluate_expression(e.left, state, params)
    b = evaluate_expression(e.right, state, params)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    return _div(a, b, e)


def compile_expression(e: Expression, index: Mapping[str, int],
                       params: Mapping[str, float]) -> Callable[[Sequence[int]], float]:
    """Close ``e`` over a species index and parameter values.

    The returned function takes a state vector and agrees exactly with
    :func:`evaluate_expression`; it exists because the simulator evaluates
    propensities millions of times.
    """
    if isinstance(e, Num):
        v = e.value
        return lambda s: v
    if isinstance(e, Var):
        if e.name in index:
            i = index[e.name]
            return lambda s: float(s[i])
        if e.name in params:
            v = float(params[e.name])
            return lambda s: v
        raise ExpressionError(f"unbound variable {e.name!r}", e)
    if isinstance(e, Neg):
        f = compile_expression(e.operand, index, params)
        return lambda s: -f(s)
    if isinstance(e, Call):
        fs = [compile_expression(a, index, params) for a in e.args]
        name = e.func
        return lambda s: _call(name, [f(s) for f in fs], e)
    fa = compile_expression(e.left, index, params)
    fb = compile_expression(e.right, index, params)
    if e.op == "+":
        return lambda s: fa(s) + fb(s)
    if e.op == "-":
        return lambda s: fa(s) - fb(s)
    if e.op == "*":
        return lambda s: fa(s) * fb(s)
    return lambda s: _div(fa(s), fb(s), e)
