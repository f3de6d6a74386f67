"""Exact arithmetic in small prime fields F_q and vectors over them.

Every value is kept as a canonical residue in ``[0, q-1]`` so that protocol
transcripts are bit-exact and can be compared across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


class DimensionError(ValueError):
    """Raised when two vectors of different length or field are combined."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def smallest_prime_above(bound: int) -> int:
    """Return the least prime strictly greater than ``bound``."""
    n = max(bound + 1, 2)
    while not is_prime(n):
        n += 1
    return n


@dataclass(frozen=True)
class PrimeField:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, int) or not is_prime(self.q):
            raise ValueError(f"field modulus must be prime, got {self.q!r}")

    def __call__(self, value: int) -> int:
        return int(value) % self.q

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def inv(self, a: int) -> int:
        if a % self.q == 0:
            raise ZeroDivisionError("zero has no inverse")
        return pow(a, self.q - 2, self.q)

    def elements(self) -> range:
        return range(self.q)

    def vector(self, entries: Iterable[int]) -> "FieldVector":
        return FieldVector(self, tuple(int(e) % self.q for e in entries))

    def zeros(self, length: int) -> "FieldVector":
        return FieldVector(self, (0,) * length)

    def ones(self, length: int) -> "FieldVector":
        return FieldVector(self, (1 % self.q,) * length)

    def unit(self, length: int, index: int) -> "FieldVector":
        """Unit vector with a one at 0-based ``index``."""
        entries = [0] * length
        entries[index] = 1
        return FieldVector(self, tuple(entries))

    def indicator(self, length: int, indices: Iterable[int]) -> "FieldVector":
        """Sum of unit vectors over 0-based ``indices``."""
        entries = [0] * length
        for i in indices:
            entries[i] = 1
        return FieldVector(self, tuple(entries))

    def __repr__(self):
        return f"F_{self.q}"


@dataclass(frozen=True)
class FieldVector:
    field: PrimeField
    entries: tuple

    def __post_init__(self):
        q = self.field.q
        if any(not (0 <= e < q) for e in self.entries):
            raise ValueError("entries must be reduced mod q")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return FieldVector(self.field, self.entries[i])
        return self.entries[i]

    def take(self, indices: Sequence[int]) -> "FieldVector":
        return FieldVector(self.field, tuple(self.entries[i] for i in indices))

    def __add__(self, other: "FieldVector") -> "FieldVector":
        return add(self, other)

    def __sub__(self, other: "FieldVector") -> "FieldVector":
        _check(self, other)
        q = self.field.q
        return FieldVector(self.field, tuple((a - b) % q for a, b in zip(self.entries, other.entries)))

    def __mul__(self, other: "FieldVector") -> "FieldVector":
        return hadamard(self, other)

    def scale(self, c: int) -> "FieldVector":
        q = self.field.q
        return FieldVector(self.field, tuple((c * a) % q for a in self.entries))

    def __repr__(self):
        return f"FieldVector(q={self.field.q}, {list(self.entries)})"


def _check(a: FieldVector, b: FieldVector) -> None:
    if a.field != b.field:
        raise DimensionError(f"field mismatch: {a.field} vs {b.field}")
    if len(a.entries) != len(b.entries):
        raise DimensionError(f"length mismatch: {len(a.entries)} vs {len(b.entries)}")


def add(a: FieldVector, b: FieldVector) -> FieldVector:
    _check(a, b)
    q = a.field.q
    return FieldVector(a.field, tuple((x + y) % q for x, y in zip(a.entries, b.entries)))


def hadamard(a: FieldVector, b: FieldVector) -> FieldVector:
    _check(a, b)
    q = a.field.q
    return FieldVector(a.field, tuple((x * y) % q for x, y in zip(a.entries, b.entries)))


def dot(a: FieldVector, b: FieldVector) -> int:
    _check(a, b)
    return sum(x * y for x, y in zip(a.entries, b.entries)) % a.field.q


def sample_uniform_vector(rng, length: int, field: PrimeField) -> FieldVector:
    """Draw ``length`` i.i.d. uniform elements of ``field``.

    ``rng`` is anything exposing numpy's ``Generator.integers`` signature,
    which includes the enumerating sources used by the audits.
    """
    if length < 1:
        raise ValueError("length must be at least 1")
    draws = rng.integers(0, field.q, size=length)
    return FieldVector(field, tuple(int(v) for v in draws))


def sample_uniform_element(rng, field: PrimeField, nonzero: bool = False) -> int:
    low = 1 if nonzero else 0
    return int(rng.integers(low, field.q))
