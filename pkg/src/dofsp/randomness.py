"""Per-party randomness streams.

Protocols never touch a global RNG. Each party (the leader, or the shared
common randomness of one non-leader entity) draws from its own stream, which
lets the audit module hold one party's randomness fixed while enumerating
every other party's draws exhaustively.

All streams expose the subset of ``numpy.random.Generator.integers`` the
protocols use: ``integers(low, high, size=None)``.
"""

from __future__ import annotations

import os
from fractions import Fraction

import numpy as np

LEADER = "leader"
SHARED = "shared"  # randomness generated jointly by all non-leaders

DEFAULT_BUDGET = 2**20
BUDGET_ENV = "DOFSP_ENUM_BUDGET"


def enumeration_budget() -> int:
    value = os.environ.get(BUDGET_ENV)
    return int(value) if value else DEFAULT_BUDGET


class EnumerationBudgetExceeded(RuntimeError):
    pass


def _party_key(party) -> int:
    if party == LEADER:
        return 0
    if party == SHARED:
        return 2**31 - 1
    return int(party)


class SeededRandomness:
    """Independent numpy generators per party, derived from one base seed."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._streams = {}

    def for_party(self, party):
        if party not in self._streams:
            self._streams[party] = np.random.default_rng([self.seed, _party_key(party)])
        return self._streams[party]


class _OdometerStream:
    def __init__(self, odometer: "Odometer"):
        self._odo = odometer

    def integers(self, low, high=None, size=None):
        if high is None:
            low, high = 0, low
        if size is None:
            return low + self._odo.draw(high - low)
        return [low + self._odo.draw(high - low) for _ in range(int(size))]


class Odometer:
    """Walks every branch of a tree of uniform draws.

    One protocol run consumes a path of draws. After the run, ``advance``
    moves to the next unexplored path in lexicographic order. Paths may have
    different lengths when control flow depends on earlier draws; each path
    carries probability ``1 / prod(radices)``.
    """

    def __init__(self):
        self.choices: list[int] = []
        self.radices: list[int] = []
        self.pos = 0

    def draw(self, radix: int) -> int:
        if radix < 1:
            raise ValueError("empty draw range")
        if self.pos < len(self.choices):
            if self.radices[self.pos] != radix:
                raise RuntimeError("draw sequence diverged between runs")
            value = self.choices[self.pos]
        else:
            self.choices.append(0)
            self.radices.append(radix)
            value = 0
        self.pos += 1
        return value

    def probability(self) -> Fraction:
        denom = 1
        for r in self.radices[: self.pos]:
            denom *= r
        return Fraction(1, denom)

    def advance(self) -> bool:
        del self.choices[self.pos :]
        del self.radices[self.pos :]
        self.pos = 0
        while self.choices:
            if self.choices[-1] + 1 < self.radices[-1]:
                self.choices[-1] += 1
                return True
            self.choices.pop()
            self.radices.pop()
        return False


class EnumeratedRandomness:
    """Randomness for one path of an exhaustive enumeration.

    Parties listed in ``fixed`` get a deterministic seeded stream, reset on
    every run, so their realization is the same along every path. All other
    parties share the odometer.
    """

    def __init__(self, odometer: Odometer, fixed: dict | None = None):
        self._odo = odometer
        self._fixed = dict(fixed or {})
        self._streams = {}

    def for_party(self, party):
        if party in self._fixed:
            if party not in self._streams:
                self._streams[party] = np.random.default_rng([self._fixed[party], _party_key(party)])
            return self._streams[party]
        return _OdometerStream(self._odo)


def enumerate_runs(run, fixed: dict | None = None, budget: int | None = None):
    """Yield ``(result, probability)`` for every randomness path of ``run``.

    ``run`` takes an ``EnumeratedRandomness`` and returns anything.
    """
    budget = enumeration_budget() if budget is None else budget
    odo = Odometer()
    count = 0
    while True:
        result = run(EnumeratedRandomness(odo, fixed))
        yield result, odo.probability()
        count += 1
        if not odo.advance():
            return
        if count >= budget:
            raise EnumerationBudgetExceeded(f"more than {budget} randomness states")
