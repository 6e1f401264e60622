"""Reaction networks: species, reactions, propensities and validation.

A network defines a CTMC implicitly; states are tuples of molecule counts
ordered like ``network.species``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence, Union

from .expr import (
    Expression, ParseError, FUNCTIONS, Call, compile_expression,
    parse_expression, variables,
)

__all__ = [
    "State", "Species", "MassAction", "Explicit", "Reaction", "ReactionNetwork",
    "Violation", "ModelError", "ModelValidationError",
    "compute_propensity", "apply_stoichiometry", "validate_network",
    "network_from_dict", "network_to_dict", "load_model_file",
]

State = tuple[int, ...]


class ModelError(RuntimeError):
    """Raised when a network produces an invalid propensity during simulation."""


@dataclass(frozen=True)
class Species:
    name: str
    initial_count: int = 0


@dataclass(frozen=True)
class MassAction:
    c: float


@dataclass(frozen=True)
class Explicit:
    rate: Expression


@dataclass(frozen=True)
class Reaction:
    name: str
    reactants: Mapping[str, int]
    products: Mapping[str, int]
    rate: Union[MassAction, Explicit]


@dataclass(frozen=True)
class Violation:
    kind: str  # duplicate-name, unknown-identifier, arity, bad-stoichiometry, non-positive-rate, ...
    subject: str
    message: str

    def __str__(self):
        return f"{self.subject}: {self.message}"


class ModelValidationError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(eq=False)
class _Compiled:
    index: dict[str, int]
    # per reaction: (requirements [(species idx, stoich)], propensity fn, delta [(idx, change)])
    channels: list[tuple[list[tuple[int, int]], Callable[[Sequence[int]], float], list[tuple[int, int]]]]


@dataclass
class ReactionNetwork:
    species: list[Species]
    parameters: dict[str, float] = field(default_factory=dict)
    reactions: list[Reaction] = field(default_factory=list)
    name: str = ""
    default_t_max: float | None = None  # horizon suggested by the model file
    _compiled: _Compiled | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def species_names(self) -> list[str]:
        return [s.name for s in self.species]

    @property
    def initial_state(self) -> State:
        return tuple(s.initial_count for s in self.species)

    def symbols(self) -> set[str]:
        return set(self.species_names) | set(self.parameters)

    def state_dict(self, state: Sequence[int]) -> dict[str, int]:
        return dict(zip(self.species_names, state))

    def compiled(self) -> _Compiled:
        if self._compiled is None:
            self._compiled = _compile(self)
        return self._compiled

    def __getstate__(self):
        d = dict(self.__dict__)
        d["_compiled"] = None
        return d


def _requirements(r: Reaction, index: Mapping[str, int]) -> list[tuple[int, int]]:
    return [(index[s], k) for s, k in r.reactants.items()]


def _compile(net: ReactionNetwork) -> _Compiled:
    index = {s.name: i for i, s in enumerate(net.species)}
    channels = []
    for r in net.reactions:
        req = _requirements(r, index)
        if isinstance(r.rate, MassAction):
            fn = _mass_action_fn(r.rate.c, req)
        else:
            fn = compile_expression(r.rate.rate, index, net.parameters)
        delta: dict[int, int] = {}
        for s, k in r.reactants.items():
            delta[index[s]] = delta.get(index[s], 0) - k
        for s, k in r.products.items():
            delta[index[s]] = delta.get(index[s], 0) + k
        channels.append((req, fn, [(i, d) for i, d in delta.items() if d != 0]))
    return _Compiled(index, channels)


def _mass_action_fn(c: float, req: list[tuple[int, int]]):
    if all(k == 1 for _, k in req):
        idx = [i for i, _ in req]
        if len(idx) == 0:
            return lambda s: c
        if len(idx) == 1:
            i0 = idx[0]
            return lambda s: c * s[i0]
        if len(idx) == 2:
            i0, i1 = idx
            return lambda s: c * s[i0] * s[i1]

    def fn(s):
        a = c
        for i, k in req:
            a *= math.comb(s[i], k)
        return float(a)
    return fn


def _propensity(name: str, req, fn, state: Sequence[int]) -> float:
    for i, k in req:
        if state[i] < k:
            return 0.0
    a = fn(state)
    if a < 0 or a != a:
        raise ModelError(f"reaction {name!r} has invalid propensity {a} at state {tuple(state)}")
    return a


def compute_propensity(r: Reaction, state: Sequence[int], net: ReactionNetwork) -> float:
    """Propensity of ``r`` at ``state``.

    Mass action uses ``c * prod C(x_i, k_i)`` (distinct reactant tuples).
    Either rate kind yields 0 when some reactant is below its stoichiometry.
    """
    index = net.compiled().index
    req = _requirements(r, index)
    if isinstance(r.rate, MassAction):
        fn = _mass_action_fn(r.rate.c, req)
    else:
        fn = compile_expression(r.rate.rate, index, net.parameters)
    return _propensity(r.name, req, fn, state)


def apply_stoichiometry(state: Sequence[int], r: Reaction, net: ReactionNetwork) -> State:
    index = net.compiled().index
    new = list(state)
    for s, k in r.reactants.items():
        new[index[s]] -= k
    for s, k in r.products.items():
        new[index[s]] += k
    assert min(new, default=0) >= 0, f"reaction {r.name!r} drove a count negative"
    return tuple(new)


def validate_network(net: ReactionNetwork) -> list[Violation]:
    """Return every problem found in ``net`` (empty list means valid)."""
    out: list[Violation] = []
    seen: set[str] = set()
    for s in net.species:
        if s.name in seen:
            out.append(Violation("duplicate-name", s.name, f"species {s.name!r} declared twice"))
        seen.add(s.name)
        if not isinstance(s.initial_count, int) or s.initial_count < 0:
            out.append(Violation("bad-initial", s.name,
                                 f"initial count must be a non-negative integer, got {s.initial_count!r}"))
    for p, v in net.parameters.items():
        if p in seen:
            out.append(Violation("duplicate-name", p, f"parameter {p!r} clashes with a species"))
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            out.append(Violation("bad-parameter", p, f"parameter value must be a finite real, got {v!r}"))
    species = set(net.species_names)
    symbols = net.symbols()
    rnames: set[str] = set()
    for r in net.reactions:
        if r.name in rnames:
            out.append(Violation("duplicate-name", r.name, f"reaction {r.name!r} declared twice"))
        rnames.add(r.name)
        for side, stoich in (("reactant", r.reactants), ("product", r.products)):
            for s, k in stoich.items():
                if s not in species:
                    out.append(Violation("unknown-identifier", r.name, f"unknown {side} species {s!r}"))
                if not isinstance(k, int) or isinstance(k, bool) or k < 1:
                    out.append(Violation("bad-stoichiometry", r.name,
                                         f"{side} {s!r} stoichiometry must be a positive integer, got {k!r}"))
        if isinstance(r.rate, MassAction):
            c = r.rate.c
            if not isinstance(c, (int, float)) or not math.isfinite(c) or c <= 0:
                out.append(Violation("non-positive-rate", r.name,
                                     f"mass-action constant must be positive, got {c!r}"))
        else:
            for v in variables(r.rate.rate):
                if v.name not in symbols:
                    out.append(Violation("unknown-identifier", r.name,
                                         f"rate references undeclared {v.name!r}"))
            out.extend(_arity_violations(r.name, r.rate.rate))
    return out


def _arity_violations(subject: str, e: Expression) -> list[Violation]:
    out = []
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Call):
            want = FUNCTIONS.get(node.func)
            if want is None:
                out.append(Violation("arity", subject, f"unknown function {node.func!r}"))
            elif len(node.args) != want:
                out.append(Violation("arity", subject,
                                     f"{node.func}() takes {want} argument(s), got {len(node.args)}"))
            stack.extend(node.args)
        else:
            stack.extend(getattr(node, a) for a in ("left", "right", "operand") if hasattr(node, a))
    return out


# ---------------------------------------------------------------------------
# JSON model files

def network_from_dict(data: Mapping, name: str = "") -> ReactionNetwork:
    """Build a network from the model-file JSON structure.

    Structural problems (missing keys, wrong types) raise ``ValueError``
    immediately; semantic ones are left to :func:`validate_network`.
    """
    if not isinstance(data, Mapping):
        raise ValueError("model file must contain a JSON object")
    try:
        species = [Species(s["name"], s.get("initial", 0)) for s in data.get("species", [])]
        params = dict(data.get("parameters", {}))
        reactions = []
        for i, r in enumerate(data.get("reactions", [])):
            rname = r.get("name", f"R{i + 1}")
            has_ma, has_rate = "mass_action" in r, "rate" in r
            if has_ma == has_rate:
                raise ValueError(f"reaction {rname!r}: give exactly one of 'mass_action' or 'rate'")
            if has_ma:
                rate = MassAction(r["mass_action"])
            else:
                try:
                    rate = Explicit(parse_expression(str(r["rate"]), None))
                except ParseError as exc:
                    raise ValueError(f"reaction {rname!r}: {exc}") from None
            reactions.append(Reaction(rname, dict(r.get("reactants", {})),
                                      dict(r.get("products", {})), rate))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError(f"malformed model: {exc!r}") from None
    t_max = data.get("t_max")
    if t_max is not None and not (isinstance(t_max, (int, float)) and t_max > 0):
        raise ValueError(f"'t_max' must be a positive number, got {t_max!r}")
    return ReactionNetwork(species, params, reactions, name=data.get("name", name),
                           default_t_max=None if t_max is None else float(t_max))


def network_to_dict(net: ReactionNetwork) -> dict:
    from .expr import to_text

    reactions = []
    for r in net.reactions:
        d = {"name": r.name, "reactants": dict(r.reactants), "products": dict(r.products)}
        if isinstance(r.rate, MassAction):
            d["mass_action"] = r.rate.c
        else:
            d["rate"] = to_text(r.rate.rate)
        reactions.append(d)
    out = {
        "species": [{"name": s.name, "initial": s.initial_count} for s in net.species],
        "parameters": dict(net.parameters),
        "reactions": reactions,
    }
    if net.name:
        out["name"] = net.name
    if net.default_t_max is not None:
        out["t_max"] = net.default_t_max
    return out


def load_model_file(path: str | Path) -> ReactionNetwork:
    """Read and validate a JSON model file.

    Raises ``OSError`` for IO problems, ``json.JSONDecodeError`` for bad
    JSON, and :class:`ModelValidationError` listing every violation.
    """
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    try:
        net = network_from_dict(data, name=path.stem)
    except ValueError as exc:
        raise ModelValidationError([Violation("malformed", path.name, str(exc))]) from None
    problems = validate_network(net)
    if problems:
        raise ModelValidationError(problems)
    return net

