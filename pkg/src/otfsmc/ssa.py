"""Direct-method stochastic simulation.

Trajectories are timed paths: a list of states, the entry time of each
state, and the time at which the path is closed (``end_time``).  The
sojourn of state ``i`` is ``times[i+1] - times[i]``, or ``end_time -
times[i]`` for the last state.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from .model import ReactionNetwork, State, _propensity

__all__ = [
    "Trace", "RngStream", "ABSORBED", "RNG_ALGORITHM",
    "next_event", "simulate_to_time", "derive_seed_stream", "splitmix64",
]

RNG_ALGORITHM = "MT19937 (Python random.Random), seeds via splitmix64"

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 output for state ``x`` (a bijection on 64-bit ints)."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed_stream(master_seed: int, count: int, offset: int = 0) -> list[int]:
    """Seeds for replicas ``offset .. offset+count-1``.

    Replica ``i`` gets ``splitmix64(master + (i+1)*gamma)``.  The counter
    steps are distinct mod 2**64 and splitmix64 is bijective, so seeds
    never collide within one master seed, and a replica's seed does not
    depend on how many replicas are requested.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if offset < 0:
        raise ValueError("offset must be >= 0")
    base = master_seed & _MASK64
    return [splitmix64(base + (i + 1) * _GAMMA) for i in range(offset, offset + count)]


class RngStream:
    """Seeded uniform source on the open interval (0, 1)."""

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._rng = random.Random(self.seed)
        self._next = self._rng.random

    def uniform(self) -> float:
        u = self._next()
        while u == 0.0:
            u = self._next()
        return u


class _Absorbed:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSORBED"

    def __reduce__(self):
        return (_Absorbed, ())


ABSORBED = _Absorbed()


@dataclass
class Trace:
    states: list[State] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    end_time: float | None = None  # None while the last sojourn is still open

    def __len__(self) -> int:
        return len(self.states)

    @property
    def n_events(self) -> int:
        return max(len(self.states) - 1, 0)

    def append(self, state: State, time: float) -> None:
        self.states.append(state)
        self.times.append(time)

    def __getitem__(self, i: int) -> State:
        return self.states[i]

    def sojourn(self, i: int) -> float:
        if i + 1 < len(self.times):
            return self.times[i + 1] - self.times[i]
        if self.end_time is None:
            raise ValueError("sojourn of the last state is not known yet")
        return self.end_time - self.times[i]

    def sojourns(self) -> list[float]:
        return [self.sojourn(i) for i in range(len(self.states))]

    def elapsed(self, i: int, k: int) -> float:
        """Time spent from entering state ``i`` until entering state ``k``."""
        return self.times[k] - self.times[i]

    def suffix(self, i: int) -> "Trace":
        return Trace(self.states[i:], self.times[i:], self.end_time)

    def state_at(self, t: float) -> State:
        """State occupied at absolute time ``t`` (the absorbing/last state persists)."""
        if t < self.times[0]:
            raise ValueError(f"time {t} precedes the trace start")
        return self.states[bisect.bisect_right(self.times, t) - 1]

    def to_csv(self, species_names: Sequence[str]) -> str:
        lines = [",".join(["time", *species_names])]
        for t, s in zip(self.times, self.states):
            lines.append(",".join([repr(t), *map(str, s)]))
        return "\n".join(lines) + "\n"


def next_event(state: Sequence[int], net: ReactionNetwork, rng: RngStream):
    """Sample ``(reaction index, delay)`` or return ``ABSORBED`` when a0 == 0."""
    channels = net.compiled().channels
    props = []
    a0 = 0.0
    for j, (req, fn, _) in enumerate(channels):
        a = _propensity(net.reactions[j].name, req, fn, state)
        props.append(a)
        a0 += a
    if a0 == 0.0:
        return ABSORBED
    tau = -math.log(rng.uniform()) / a0
    target = rng.uniform() * a0
    acc = 0.0
    last = 0
    for j, a in enumerate(props):
        if a > 0.0:
            last = j
            acc += a
            if target < acc:
                return j, tau
    # rounding left target >= acc: pick the last channel that can fire
    return last, tau


def fire(state: Sequence[int], j: int, net: ReactionNetwork) -> State:
    new = list(state)
    for i, d in net.compiled().channels[j][2]:
        new[i] += d
    return tuple(new)


def simulate_to_time(net: ReactionNetwork, init: Sequence[int], t_max: float,
                     rng: RngStream) -> Trace:
    """Full trajectory on [0, t_max]; the last state is closed at ``t_max``."""
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    state = tuple(init)
    t = 0.0
    trace = Trace([state], [t])
    while True:
        ev = next_event(state, net, rng)
        if ev is ABSORBED:
            break
        j, tau = ev
        t_next = t + tau
        if t_next >= t_max:
            break
        state = fire(state, j, net)
        t = t_next
        trace.append(state, t)
    trace.end_time = t_max
    return trace
