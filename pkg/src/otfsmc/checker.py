"""On-the-fly verification: simulate only as far as the formula needs.

One append-only trace buffer is shared by every subformula evaluation of
a replica.  A new SSA event is generated only when an evaluation asks for
the successor of the last buffered state, so generation stops as soon as
the root verdict is decided or the time horizon is reached.

Verdicts are three-valued.  A temporal operator that runs into the
horizon (a state entered at or after ``t_max``) yields UNKNOWN, which
propagates through ``!``, ``&``, ``|`` by Kleene's rules; only the root
verdict is mapped pessimistically (UNKNOWN -> false).
"""

from __future__ import annotations

import enum
from typing import Callable, Sequence

from .bltlc import COMPARATORS, And, Atom, Formula, Next, Not, Or, Until, desugar_formula
from .expr import compile_expression
from .model import ReactionNetwork
from .ssa import ABSORBED, RngStream, Trace, fire, next_event

__all__ = ["Verdict", "TraceBuffer", "Checker", "simulate_verify", "finalize_verdict"]


class Verdict(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    @staticmethod
    def of(b: bool) -> "Verdict":
        return Verdict.TRUE if b else Verdict.FALSE


T, F, U = Verdict.TRUE, Verdict.FALSE, Verdict.UNKNOWN


def _not(v):
    return F if v is T else T if v is F else U


def _and(a, b):
    if a is F or b is F:
        return F
    if a is T and b is T:
        return T
    return U


def _or(a, b):
    if a is T or b is T:
        return T
    if a is F and b is F:
        return F
    return U


class TraceBuffer:
    """Append-only trajectory that grows one SSA event at a time."""

    def __init__(self, net: ReactionNetwork, init: Sequence[int], rng: RngStream):
        self.net = net
        self.rng = rng
        self.trace = Trace([tuple(init)], [0.0])
        self.absorbed = False

    @property
    def last(self) -> int:
        return len(self.trace.states) - 1

    def extend(self) -> bool:
        """Append the successor of the last state; False if the chain is absorbed."""
        if self.absorbed:
            return False
        state = self.trace.states[-1]
        ev = next_event(state, self.net, self.rng)
        if ev is ABSORBED:
            self.absorbed = True
            return False
        j, tau = ev
        self.trace.append(fire(state, j, self.net), self.trace.times[-1] + tau)
        return True


class Checker:
    """Reusable verifier for one (desugared formula, network) pair."""

    def __init__(self, formula: Formula, net: ReactionNetwork):
        self.formula = desugar_formula(formula)
        self.net = net
        self._atoms: dict[Atom, Callable[[Sequence[int]], bool]] = {}

    def _atom_fn(self, a: Atom):
        fn = self._atoms.get(a)
        if fn is None:
            index = self.net.compiled().index
            lhs = compile_expression(a.lhs, index, self.net.parameters)
            rhs = compile_expression(a.rhs, index, self.net.parameters)
            cmp = COMPARATORS[a.op]
            fn = self._atoms[a] = lambda s: cmp(lhs(s), rhs(s))
        return fn

    def run(self, init: Sequence[int], t_max: float, rng: RngStream) -> tuple[Verdict, Trace]:
        if not t_max > 0:
            raise ValueError("t_max must be positive")
        buf = TraceBuffer(self.net, init, rng)
        verdict = self._eval(self.formula, 0, buf, t_max)
        return verdict, buf.trace

    def _eval(self, g: Formula, i: int, buf: TraceBuffer, t_max: float) -> Verdict:
        if isinstance(g, Atom):
            return T if self._atom_fn(g)(buf.trace.states[i]) else F
        if isinstance(g, Not):
            return _not(self._eval(g.sub, i, buf, t_max))
        if isinstance(g, And):
            a = self._eval(g.left, i, buf, t_max)
            if a is F:
                return F
            return _and(a, self._eval(g.right, i, buf, t_max))
        if isinstance(g, Or):
            a = self._eval(g.left, i, buf, t_max)
            if a is T:
                return T
            return _or(a, self._eval(g.right, i, buf, t_max))
        if isinstance(g, Next):
            return self._next(g, i, buf, t_max)
        if isinstance(g, Until):
            return self._until(g, i, buf, t_max)
        raise TypeError(f"formula not desugared: {g!r}")

    def _next(self, g: Next, i, buf, t_max):
        if i == buf.last and not buf.extend():
            return F
        times = buf.trace.times
        if times[i + 1] - times[i] not in g.interval:
            return F
        if times[i + 1] >= t_max:
            return U
        return self._eval(g.sub, i + 1, buf, t_max)

    def _until(self, g: Until, i, buf, t_max):
        times = buf.trace.times
        lo, hi = g.interval.lower, g.interval.upper
        best = F  # disjunction of witness terms seen so far
        prefix = T  # conjunction of the left operand over earlier positions
        k = i
        while True:
            e = times[k] - times[i]
            if e > hi:
                return best
            if times[k] >= t_max:
                return U
            if e >= lo:
                term = _and(self._eval(g.right, k, buf, t_max), prefix)
                if term is T:
                    return T
                best = _or(best, term)
            prefix = _and(prefix, self._eval(g.left, k, buf, t_max))
            if prefix is F:
                return best
            if best is U and prefix is U:
                return U
            if k == buf.last and not buf.extend():
                return best
            k += 1


def simulate_verify(formula: Formula, net: ReactionNetwork, init: Sequence[int],
                    t_max: float, rng: RngStream) -> tuple[Verdict, Trace]:
    """Verify ``formula`` on one trajectory generated on demand."""
    return Checker(formula, net).run(init, t_max, rng)


def finalize_verdict(v: Verdict) -> bool:
    return v is Verdict.TRUE
