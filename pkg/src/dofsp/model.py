"""Problem instances, function profiles and brute-force ground truth.

Index conventions: alphabet positions, the index sets ``J_r`` / ``I_r`` and
every reported knowledge set are 1-based, matching how the schemes number
alphabet elements. Vectors are stored as plain 0-based tuples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence


class AssumptionViolation(ValueError):
    """The instance breaks a modeling assumption (e.g. empty intersection)."""


class EmptyIntersectionError(AssumptionViolation):
    pass


@dataclass(frozen=True)
class Alphabet:
    elements: tuple

    def __post_init__(self):
        if len(set(self.elements)) != len(self.elements):
            raise ValueError("alphabet labels must be distinct")
        if not self.elements:
            raise ValueError("alphabet must be non-empty")

    @property
    def K(self) -> int:
        return len(self.elements)

    def index_of(self, label) -> int:
        return self.elements.index(label) + 1

    def labels(self, indices: Iterable[int]) -> list:
        return [self.elements[k - 1] for k in sorted(indices)]

    @classmethod
    def of_size(cls, K: int) -> "Alphabet":
        return cls(tuple(_default_label(k) for k in range(K)))


def _default_label(k: int) -> str:
    # A..Z, then AA, AB, ...
    label = ""
    k += 1
    while k:
        k, rem = divmod(k - 1, 26)
        label = chr(ord("A") + rem) + label
    return label


@dataclass(frozen=True)
class FeasibleSet:
    K: int
    members: frozenset

    def __post_init__(self):
        if not self.members:
            raise ValueError("feasible set must be non-empty")
        if any(not (1 <= k <= self.K) for k in self.members):
            raise ValueError("feasible set member outside the alphabet")

    @property
    def size(self) -> int:
        return len(self.members)

    @classmethod
    def from_labels(cls, alphabet: Alphabet, labels: Iterable) -> "FeasibleSet":
        return cls(alphabet.K, frozenset(alphabet.index_of(x) for x in labels))

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "FeasibleSet":
        return cls(len(bits), frozenset(k + 1 for k, b in enumerate(bits) if b))


@dataclass(frozen=True)
class IncidenceVector:
    bits: tuple

    @property
    def K(self) -> int:
        return len(self.bits)

    def support(self) -> frozenset:
        return frozenset(k + 1 for k, b in enumerate(self.bits) if b)

    def popcount(self) -> int:
        return sum(self.bits)

    def at(self, indices: Iterable[int]) -> tuple:
        return tuple(self.bits[k - 1] for k in indices)


def incidence_vector(fs: FeasibleSet) -> IncidenceVector:
    return IncidenceVector(tuple(1 if k + 1 in fs.members else 0 for k in range(fs.K)))


@dataclass(frozen=True)
class Objective:
    """Objective value per alphabet position, with an optimization direction.

    ``values[k-1]`` is the value of alphabet element ``k``, in ``1..tau``.
    """

    values: tuple
    direction: str = "max"
    tau: int | None = None

    def __post_init__(self):
        if self.direction not in ("max", "min"):
            raise ValueError("direction must be 'max' or 'min'")
        tau = self.tau if self.tau is not None else max(self.values)
        object.__setattr__(self, "tau", tau)
        if any(not (1 <= v <= tau) for v in self.values):
            raise ValueError("objective values must lie in 1..tau")

    @property
    def K(self) -> int:
        return len(self.values)

    def value(self, k: int) -> int:
        return self.values[k - 1]

    def ranking(self, indices: Iterable[int] | None = None) -> list:
        """Distinct realized values over ``indices``, best first."""
        if indices is None:
            indices = range(1, self.K + 1)
        realized = {self.values[k - 1] for k in indices}
        return sorted(realized, reverse=(self.direction == "max"))

    def better(self, a: int, b: int) -> bool:
        return a > b if self.direction == "max" else a < b


@dataclass(frozen=True)
class GlobalProfile:
    mu: tuple
    partitions: tuple
    values: tuple
    position: tuple  # position[k-1] = 1-based slot of alphabet element k after permuting

    @property
    def T(self) -> int:
        return len(self.mu)

    @property
    def K(self) -> int:
        return sum(self.mu)

    @property
    def order(self) -> tuple:
        """Alphabet indices in permuted order (the concatenated partitions)."""
        return tuple(k for part in self.partitions for k in part)

    def offset(self, r: int) -> int:
        return sum(self.mu[: r - 1])

    def slots(self, r: int) -> range:
        """0-based positions of partition ``r`` inside a permuted vector."""
        start = self.offset(r)
        return range(start, start + self.mu[r - 1])

    def apply(self, bits: Sequence[int]) -> tuple:
        return tuple(bits[k - 1] for k in self.order)

    def invert(self, permuted: Sequence[int]) -> tuple:
        out = [0] * len(permuted)
        for slot, k in enumerate(self.order):
            out[k - 1] = permuted[slot]
        return tuple(out)


def global_profile(objective: Objective) -> GlobalProfile:
    ranking = objective.ranking()
    partitions = tuple(
        tuple(k for k in range(1, objective.K + 1) if objective.value(k) == v) for v in ranking
    )
    position = [0] * objective.K
    slot = 0
    for part in partitions:
        for k in part:
            slot += 1
            position[k - 1] = slot
    return GlobalProfile(
        mu=tuple(len(p) for p in partitions),
        partitions=partitions,
        values=tuple(ranking),
        position=tuple(position),
    )


@dataclass(frozen=True)
class LocalProfile:
    alpha: tuple
    runs: tuple  # J_1..J_L, each ascending 1-based indices
    values: tuple

    @property
    def L(self) -> int:
        return len(self.alpha)

    def prefix(self, R: int) -> frozenset:
        return frozenset(k for run in self.runs[:R] for k in run)


def local_profile(objective: Objective, leader_set: FeasibleSet) -> LocalProfile:
    members = sorted(leader_set.members)
    if not members:
        raise ValueError("leader set must be non-empty")
    ranking = objective.ranking(members)
    runs = tuple(tuple(k for k in members if objective.value(k) == v) for v in ranking)
    return LocalProfile(alpha=tuple(len(r) for r in runs), runs=runs, values=tuple(ranking))


@dataclass(frozen=True)
class Instance:
    alphabet: Alphabet
    sets: tuple
    objective: Objective
    databases: tuple
    leader: int = 1
    seed: int = 0
    name: str = ""
    topology: str | None = None
    expected: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        K = self.alphabet.K
        if len(self.sets) < 2:
            raise ValueError("need at least two entities")
        if len(self.databases) != len(self.sets):
            raise ValueError("one database count per entity is required")
        if not (1 <= self.leader <= len(self.sets)):
            raise ValueError("leader index out of range")
        if self.objective.K != K or any(s.K != K for s in self.sets):
            raise ValueError("sets and objective must cover the alphabet")
        for i in self.non_leaders:
            if self.databases[i - 1] < 2:
                raise ValueError(f"entity {i} needs at least two databases")
        if not frozenset.intersection(*(s.members for s in self.sets)):
            raise EmptyIntersectionError("feasible sets have an empty intersection")

    @property
    def N(self) -> int:
        return len(self.sets)

    @property
    def K(self) -> int:
        return self.alphabet.K

    @property
    def non_leaders(self) -> list:
        return [i for i in range(1, self.N + 1) if i != self.leader]

    @property
    def N_eff(self) -> int:
        return min(self.databases[i - 1] for i in self.non_leaders)

    def feasible(self, i: int) -> FeasibleSet:
        return self.sets[i - 1]

    def incidence(self, i: int) -> IncidenceVector:
        return incidence_vector(self.sets[i - 1])

    def leader_profile(self) -> LocalProfile:
        return local_profile(self.objective, self.sets[self.leader - 1])

    def replace(self, **changes) -> "Instance":
        return replace(self, **changes)


def intersection_oracle(instance: Instance):
    """Return ``(X_cap, M)`` by direct elementwise AND."""
    bits = [1] * instance.K
    for s in instance.sets:
        x = incidence_vector(s).bits
        bits = [a & b for a, b in zip(bits, x)]
    X = IncidenceVector(tuple(bits))
    if X.popcount() == 0:
        raise EmptyIntersectionError("feasible sets have an empty intersection")
    return X, X.popcount()


def solution_oracle(instance: Instance) -> frozenset:
    """Indices of the optimal elements of the joint feasible set, ties included."""
    X, _ = intersection_oracle(instance)
    common = X.support()
    best = instance.objective.ranking(common)[0]
    return frozenset(k for k in common if instance.objective.value(k) == best)


def stopping_round(instance: Instance) -> int:
    """First run of the leader's local profile that meets the intersection."""
    X, _ = intersection_oracle(instance)
    common = X.support()
    for r, run in enumerate(instance.leader_profile().runs, start=1):
        if common.intersection(run):
            return r
    raise EmptyIntersectionError("feasible sets have an empty intersection")


def ring_stopping_round(instance: Instance) -> int:
    """First partition of the global profile that meets the intersection."""
    X, _ = intersection_oracle(instance)
    common = X.support()
    for r, part in enumerate(global_profile(instance.objective).partitions, start=1):
        if common.intersection(part):
            return r
    raise EmptyIntersectionError("feasible sets have an empty intersection")


def nominal_leakage_index_set(instance: Instance, R: int) -> frozenset:
    profile = instance.leader_profile()
    if not (1 <= R <= profile.L):
        raise ValueError(f"stopping round {R} outside 1..{profile.L}")
    return profile.prefix(R)


# --- JSON instance files -------------------------------------------------------


def instance_from_dict(data: dict) -> Instance:
    alphabet = Alphabet(tuple(data["alphabet"]))
    sets = tuple(FeasibleSet.from_labels(alphabet, members) for members in data["sets"])
    obj = data["objective"]
    raw = obj["values"]
    if isinstance(raw, dict):
        values = tuple(int(raw[label]) for label in alphabet.elements)
    else:
        values = tuple(int(v) for v in raw)
    objective = Objective(values, direction=obj.get("direction", "max"), tau=obj.get("tau"))
    databases = tuple(int(n) for n in data["databases"])
    return Instance(
        alphabet=alphabet,
        sets=sets,
        objective=objective,
        databases=databases,
        leader=int(data.get("leader", 1)),
        seed=int(data.get("seed", 0)),
        name=data.get("name", ""),
        topology=data.get("topology"),
        expected=dict(data.get("expected", {})),
    )


def instance_to_dict(instance: Instance) -> dict:
    a = instance.alphabet
    out = {
        "name": instance.name,
        "alphabet": list(a.elements),
        "sets": [a.labels(s.members) for s in instance.sets],
        "objective": {
            "values": {label: v for label, v in zip(a.elements, instance.objective.values)},
            "direction": instance.objective.direction,
            "tau": instance.objective.tau,
        },
        "databases": list(instance.databases),
        "leader": instance.leader,
        "seed": instance.seed,
    }
    if instance.topology:
        out["topology"] = instance.topology
    if instance.expected:
        out["expected"] = instance.expected
    return out


def parse_instances(data: dict | list) -> list:
    """Parse a single instance object or ``{"defaults": ..., "instances": [...]}``."""
    if isinstance(data, list):
        return [instance_from_dict(d) for d in data]
    if "instances" not in data:
        return [instance_from_dict(data)]
    defaults = data.get("defaults", {})
    out = []
    for entry in data["instances"]:
        merged = {**defaults, **entry}
        if "objective" in defaults and "objective" in entry:
            merged["objective"] = {**defaults["objective"], **entry["objective"]}
        out.append(instance_from_dict(merged))
    return out


def load_instances(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_instances(json.load(fh))


def dump_instances(instances: Sequence[Instance]) -> str:
    return json.dumps({"instances": [instance_to_dict(i) for i in instances]}, indent=2)


FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name
