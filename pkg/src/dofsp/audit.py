"""Exhaustive privacy and reliability audits on small instances.

Every randomness draw of a run is enumerated (``randomness.enumerate_runs``),
so each party's view has an exact rational distribution. Privacy claims are
then checked as equalities between distributions over *counterfactual*
instances that differ only in what the observer is entitled not to know.

* Database check: for database ``j`` of ``E_i``, instances sharing ``X_i``
  must induce the same joint distribution of (``E_i``'s own common
  randomness, everything the database sends and receives). Instances are
  compared within groups of equal traffic shape; whether the shape itself
  varies is reported as ``shape_leak``.
* Leader check: instances sharing the leader's set, the stopping round ``R``
  and the intersection on the leader's nominal index set must induce the
  same leader view, and the knowledge set the protocol reports must equal
  that nominal set.
* Reliability: every run on every instance recovers the optimum set.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

from .model import (
    Alphabet,
    EmptyIntersectionError,
    FeasibleSet,
    Instance,
    Objective,
    global_profile,
    intersection_oracle,
    solution_oracle,
)
from .randomness import SHARED, EnumerationBudgetExceeded, SeededRandomness, enumerate_runs, enumeration_budget
from .ring import naive_psi_ring, run_ring
from .star import naive_psi_star, run_star
from .transcript import db_name, leader_name
from .two_party import naive_psi_two_party, run_two_party

PROTOCOLS = ("two_party", "ring", "star", "naive_two_party", "naive_ring", "naive_star")
PASS, FAIL, UNDECIDED = "PASS", "FAIL", "UNDECIDED"
STAT_SAMPLES = 2000
STAT_Z = 5.0


def runner(protocol: str, mutation: str | None = None, multiplier: str = "global"):
    if protocol == "two_party":
        return lambda inst, rnd: run_two_party(inst, rnd, mutation=mutation)
    if protocol == "ring":
        return lambda inst, rnd: run_ring(inst, rnd)
    if protocol == "star":
        return lambda inst, rnd: run_star(inst, rnd, mutation=mutation, multiplier=multiplier)
    if protocol == "naive_two_party":
        return lambda inst, rnd: naive_psi_two_party(inst, rnd)
    if protocol == "naive_ring":
        return lambda inst, rnd: naive_psi_ring(inst, rnd)
    if protocol == "naive_star":
        return lambda inst, rnd: naive_psi_star(inst, rnd, multiplier=multiplier)
    raise ValueError(f"unknown protocol {protocol!r}")


class _RecordingStream:
    def __init__(self, inner, log: list):
        self._inner = inner
        self._log = log

    def integers(self, low, high=None, size=None):
        out = self._inner.integers(low, high, size)
        if size is None:
            self._log.append(int(out))
        else:
            self._log.extend(int(v) for v in out)
        return out


class _Recording:
    """Randomness wrapper that logs the draws of selected parties."""

    def __init__(self, inner, parties):
        self._inner = inner
        self.log = {p: [] for p in parties}

    def for_party(self, party):
        stream = self._inner.for_party(party)
        if party in self.log:
            return _RecordingStream(stream, self.log[party])
        return stream


# --- counterfactual families ------------------------------------------------------


@dataclass
class AuditFamily:
    name: str
    protocol: str
    instances: list
    mutation: str | None = None
    multiplier: str = "global"
    fixed: dict = field(default_factory=dict)  # party -> seed held fixed
    checks: tuple = ("database", "leader", "reliability")
    note: str = ""


def counterfactuals(base: Instance, vary) -> list:
    """Every assignment of non-empty sets to the entities in ``vary`` with a non-empty intersection."""
    K = base.K
    subsets = [
        FeasibleSet(K, frozenset(c))
        for n in range(1, K + 1)
        for c in itertools.combinations(range(1, K + 1), n)
    ]
    out = []
    for choice in itertools.product(subsets, repeat=len(vary)):
        sets = list(base.sets)
        for i, s in zip(vary, choice):
            sets[i - 1] = s
        try:
            out.append(base.replace(sets=tuple(sets)))
        except EmptyIntersectionError:
            continue
    return out


def _instance(values, sets, databases, leader=1) -> Instance:
    K = len(values)
    return Instance(
        alphabet=Alphabet.of_size(K),
        sets=tuple(FeasibleSet(K, frozenset(s)) for s in sets),
        objective=Objective(tuple(values), "max"),
        databases=tuple(databases),
        leader=leader,
    )


def default_suite() -> list:
    """Small families covering all three protocols and their parameter corners."""
    fams = []
    everyone = lambda inst: list(range(1, inst.N + 1))
    for name, values, dbs in (
        ("two_party/K3-distinct", (3, 2, 1), (2, 2)),
        ("two_party/K2-tied", (1, 1), (2, 2)),
        ("two_party/K2-tied-N3", (1, 1), (2, 3)),
    ):
        base = _instance(values, [range(1, len(values) + 1)] * 2, dbs)
        fams.append(AuditFamily(name, "two_party", counterfactuals(base, everyone(base))))
    for name, values in (("ring/K2-distinct", (2, 1)), ("ring/K2-tied", (1, 1))):
        base = _instance(values, [range(1, 3)] * 3, (2, 2, 2))
        fams.append(AuditFamily(name, "ring", counterfactuals(base, everyone(base))))
    for name, values in (("star/K2-distinct", (2, 1)), ("star/K2-tied", (1, 1))):
        base = _instance(values, [range(1, 3)] * 3, (2, 3, 3))
        fams.append(AuditFamily(name, "star", counterfactuals(base, everyone(base))))
    fams.append(star_three_element_family("global"))
    return fams


def star_three_element_family(multiplier: str = "global", mutation: str | None = None) -> AuditFamily:
    """Leader check where two absent elements can be checked in one run."""
    base = _instance((3, 2, 1), [range(1, 4)] * 3, (2, 2, 2))
    return AuditFamily(
        f"star/K3-distinct-{multiplier}",
        "star",
        counterfactuals(base, [2, 3]),
        mutation=mutation,
        multiplier=multiplier,
        fixed={1: 0},
        checks=("leader", "reliability"),
        note="leader randomness held at one seeded realization",
    )


def mutation_suite() -> list:
    """Families on which each seeded mutation must be caught."""
    tp = _instance((3, 2, 1), [range(1, 4)] * 2, (2, 2))
    reuse = _instance((4, 3, 2, 1), [range(1, 5), [4]], (2, 2))
    st = _instance((2, 1), [range(1, 3)] * 3, (2, 3, 3))
    return [
        AuditFamily("mutation/drop-mask", "two_party", counterfactuals(tp, [2]), mutation="drop-mask",
                    checks=("leader",)),
        AuditFamily("mutation/reuse-pad", "two_party", counterfactuals(reuse, [1]), mutation="reuse-pad",
                    checks=("database",)),
        AuditFamily("mutation/reveal-count", "star", counterfactuals(st, [2, 3]), mutation="reveal-count",
                    checks=("leader",)),
    ]


def naive_suite() -> list:
    """Naive PSI against the scheme: one family with ``R < L`` possible, one with ``R = L`` forced."""
    short = _instance((3, 2, 1), [range(1, 4)] * 2, (2, 2))
    flat = _instance((1, 1, 2), [[1, 2], range(1, 4)], (2, 2))
    return [
        AuditFamily("naive/K3-distinct", "naive_two_party", counterfactuals(short, [2]), checks=("leader",)),
        AuditFamily("naive/K3-single-run", "naive_two_party", counterfactuals(flat, [2]), checks=("leader",)),
        AuditFamily("scheme/K3-single-run", "two_party", counterfactuals(flat, [2]), checks=("leader",)),
    ]


# --- enumeration ----------------------------------------------------------------


@dataclass
class ViewDistribution:
    observer: str
    probabilities: dict  # view -> Fraction
    states: int
    shape: tuple
    exact: bool = True

    def total(self) -> Fraction:
        return sum(self.probabilities.values(), Fraction(0))


@dataclass
class _Enumeration:
    instance: Instance
    views: dict  # observer -> {view: Fraction}
    shapes: dict  # observer -> shape
    states: int
    exact: bool
    reliable: bool
    knowledge: set
    q: int = 0
    bad_run: dict | None = None


_CACHE: dict = {}


def clear_cache() -> None:
    _CACHE.clear()


def observers(instance: Instance) -> list:
    obs = [leader_name(instance.leader)]
    for i in instance.non_leaders:
        obs.extend(db_name(i, j) for j in range(1, instance.databases[i - 1] + 1))
    return obs


def _observer_key(observer: str, instance: Instance, log: dict, view: tuple, protocol: str):
    if observer == leader_name(instance.leader):
        return view
    entity = int(observer[1:].split(".")[0])
    own = tuple(log.get(entity, ()))
    shared = tuple(log.get(SHARED, ())) if protocol.endswith("star") else ()
    return (own, shared, view)


def _enumerate(protocol: str, instance: Instance, mutation=None, multiplier="global", fixed=None, budget=None):
    fixed = dict(fixed or {})
    budget = enumeration_budget() if budget is None else budget
    key = (protocol, instance, mutation, multiplier, tuple(sorted(fixed.items(), key=str)), budget)
    if key in _CACHE:
        return _CACHE[key]
    run = runner(protocol, mutation, multiplier)
    parties = [i for i in instance.non_leaders] + [SHARED]
    obs = observers(instance)
    truth = solution_oracle(instance)
    views = {o: defaultdict(Fraction) for o in obs}
    shapes = {}
    knowledge = set()
    fields = set()
    reliable = True
    bad = None

    def one(rnd):
        rec = _Recording(rnd, parties)
        out = run(instance, rec)
        return out, rec.log

    def absorb(out, log, p):
        nonlocal reliable, bad
        for o in obs:
            view = out.transcript.view(o)
            views[o][_observer_key(o, instance, log, view, protocol)] += p
            shapes.setdefault(o, out.transcript.shape(o))
        knowledge.add(out.knowledge)
        fields.add(out.q)
        if out.solution != truth and reliable:
            reliable = False
            bad = {"solution": sorted(out.solution), "expected": sorted(truth), "transcript": out.transcript.as_dict()}

    states = 0
    exact = True
    try:
        for (out, log), p in enumerate_runs(one, fixed=fixed, budget=budget):
            absorb(out, log, p)
            states += 1
    except EnumerationBudgetExceeded:
        exact = False
        views = {o: defaultdict(Fraction) for o in obs}
        states = 0
        for s in range(STAT_SAMPLES):
            out, log = one(SeededRandomness(hash((instance.seed, s)) & 0x7FFFFFFF))
            absorb(out, log, Fraction(1, STAT_SAMPLES))
            states += 1
    result = _Enumeration(instance, {o: dict(v) for o, v in views.items()}, shapes, states, exact, reliable,
                          knowledge, max(fields), bad)
    _CACHE[key] = result
    return result


def database_view_distribution(protocol: str, instance: Instance, db: str, **opts) -> ViewDistribution:
    """Exact distribution of (own common randomness, view) for database ``db``, e.g. ``"E2.db1"``."""
    e = _enumerate(protocol, instance, **opts)
    if db not in e.views:
        raise ValueError(f"{db} is not a database of this instance")
    return ViewDistribution(db, e.views[db], e.states, e.shapes.get(db, ()), e.exact)


def leader_view_distribution(protocol: str, instance: Instance, **opts) -> ViewDistribution:
    e = _enumerate(protocol, instance, **opts)
    me = leader_name(instance.leader)
    return ViewDistribution(me, e.views[me], e.states, e.shapes.get(me, ()), e.exact)


# --- comparisons ----------------------------------------------------------------


def _marginals(dist: dict) -> dict:
    out = defaultdict(float)
    for view, p in dist.items():
        for pos, item in enumerate(_flatten(view)):
            out[(pos, item)] += float(p)
    return out


def _flatten(obj):
    if isinstance(obj, tuple):
        for x in obj:
            yield from _flatten(x)
    else:
        yield obj


def distributions_equal(a: dict, b: dict, exact: bool = True) -> bool:
    if exact:
        return a == b
    ma, mb = _marginals(a), _marginals(b)
    for key in set(ma) | set(mb):
        pa, pb = ma.get(key, 0.0), mb.get(key, 0.0)
        pooled = (pa + pb) / 2
        se = math.sqrt(max(pooled * (1 - pooled), 1e-12) * 2 / STAT_SAMPLES)
        if abs(pa - pb) / se > STAT_Z:
            return False
    return True


def _conditional(dist: dict) -> dict:
    """``{(own draws, shared draws): {view: P(view | draws)}}`` from a joint keyed ``(own, shared, view)``."""
    joint = defaultdict(dict)
    for (own, shared, view), p in dist.items():
        joint[(own, shared)][view] = p
    out = {}
    for logs, views in joint.items():
        total = sum(views.values(), Fraction(0))
        out[logs] = {v: p / total for v, p in views.items()}
    return out


def conditional_views_equal(a: dict, b: dict) -> bool:
    """Compare database views given the observer's randomness.

    Draws are made lazily, so one instance may consume more of the same
    common-randomness stream than another. Two logs describe the same
    realization when they agree on their overlap; for every such pair the
    conditional view distributions must coincide.
    """
    ca, cb = _conditional(a), _conditional(b)
    own_len = min(len(k[0]) for k in list(ca) + list(cb))
    sh_len = min(len(k[1]) for k in list(ca) + list(cb))
    index = defaultdict(list)
    for k in cb:
        index[(k[0][:own_len], k[1][:sh_len])].append(k)
    for k, views in ca.items():
        partners = index.get((k[0][:own_len], k[1][:sh_len]))
        if not partners:
            return False
        for other in partners:
            if not (_agree(k[0], other[0]) and _agree(k[1], other[1])):
                continue
            if cb[other] != views:
                return False
    return True


def _agree(x: tuple, y: tuple) -> bool:
    n = min(len(x), len(y))
    return x[:n] == y[:n]


def _describe(instance: Instance) -> dict:
    a = instance.alphabet
    return {
        "sets": [a.labels(s.members) for s in instance.sets],
        "objective": list(instance.objective.values),
        "databases": list(instance.databases),
    }


def _difference(a: dict, b: dict):
    for view in sorted(set(a) | set(b), key=repr):
        if a.get(view, 0) != b.get(view, 0):
            return {"view": repr(view), "p_first": str(a.get(view, 0)), "p_second": str(b.get(view, 0))}
    return None


@dataclass
class CheckResult:
    check: str
    protocol: str
    family: str
    verdict: str
    states: int
    counterfactuals: int
    groups: int = 0
    shape_leak: bool = False
    exact: bool = True
    notes: list = field(default_factory=list)
    counterexample: dict | None = None

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "protocol": self.protocol,
            "family": self.family,
            "verdict": self.verdict,
            "enumerated_states": self.states,
            "counterfactuals": self.counterfactuals,
            "groups": self.groups,
            "shape_leak": self.shape_leak,
            "exact": self.exact,
            "notes": self.notes,
            "counterexample": self.counterexample,
        }


def _as_family(protocol, family, opts) -> AuditFamily:
    if isinstance(family, AuditFamily):
        return family
    return AuditFamily("custom", protocol, list(family), **opts)


def _runs(fam: AuditFamily, budget=None) -> list:
    return [
        _enumerate(fam.protocol, inst, fam.mutation, fam.multiplier, fam.fixed, budget) for inst in fam.instances
    ]


def _compare_groups(groups: dict, observer_of, exact: bool, equal=None):
    """Return ``(ok, counterexample)`` after comparing every member of each group to its first member."""
    for key, members in groups.items():
        first_enum = members[0]
        ref = first_enum.views[observer_of(first_enum)]
        for other in members[1:]:
            dist = other.views[observer_of(other)]
            same = equal(ref, dist) if (equal is not None and exact) else distributions_equal(ref, dist, exact)
            if not same:
                return False, {
                    "group": repr(key),
                    "first": _describe(first_enum.instance),
                    "second": _describe(other.instance),
                    "difference": _difference(ref, dist),
                    "observer": observer_of(first_enum),
                }
    return True, None


def zero_leakage_check(protocol: str, family, db: str | None = None, budget=None, **opts) -> CheckResult:
    """Databases learn nothing about other entities' sets beyond the traffic shape."""
    fam = _as_family(protocol, family, opts)
    runs = _runs(fam, budget)
    exact = all(r.exact for r in runs)
    dbs = sorted({o for r in runs for o in r.views if "." in o})
    if db is not None:
        dbs = [db]
    total_groups = 0
    shape_leak = False
    for observer in dbs:
        entity = int(observer[1:].split(".")[0])
        by_set = defaultdict(list)
        for r in runs:
            if observer in r.views:
                by_set[r.instance.sets[entity - 1]].append(r)
        groups = {}
        for s, members in by_set.items():
            shapes = {(r.shapes.get(observer, ()), r.q) for r in members}
            shape_leak |= len(shapes) > 1
            for r in members:
                groups.setdefault((observer, s.members, r.q, r.shapes.get(observer, ())), []).append(r)
        total_groups += len(groups)
        ok, cex = _compare_groups(groups, lambda r, o=observer: o, exact, conditional_views_equal)
        if not ok:
            return CheckResult("zero_leakage", fam.protocol, fam.name, FAIL, sum(r.states for r in runs),
                               len(runs), total_groups, shape_leak, exact, [fam.note] if fam.note else [], cex)
    notes = [fam.note] if fam.note else []
    if shape_leak:
        notes.append("message counts or field size seen by some database depend on other entities' sets")
    return CheckResult("zero_leakage", fam.protocol, fam.name, PASS if exact else UNDECIDED,
                       sum(r.states for r in runs), len(runs), total_groups, shape_leak, exact, notes)


def nominal_key(protocol: str, instance: Instance) -> tuple:
    """``(R, nominal index set, intersection bits there)`` for the leader of ``instance``."""
    X, _ = intersection_oracle(instance)
    common = X.support()
    if protocol.endswith("ring"):
        parts = global_profile(instance.objective).partitions
    else:
        parts = instance.leader_profile().runs
    R = next(r for r, p in enumerate(parts, start=1) if common.intersection(p))
    nominal = frozenset(k for p in parts[:R] for k in p)
    return R, nominal, tuple(X.at(sorted(nominal)))


def leader_leakage_check(protocol: str, family, budget=None, **opts) -> CheckResult:
    """The leader learns the intersection on its nominal index set and nothing more."""
    fam = _as_family(protocol, family, opts)
    runs = _runs(fam, budget)
    exact = all(r.exact for r in runs)
    notes = [fam.note] if fam.note else []
    base = fam.protocol.replace("naive_", "")
    for r in runs:
        R, nominal, _ = nominal_key(base, r.instance)
        if r.knowledge != {nominal}:
            return CheckResult("leader_leakage", fam.protocol, fam.name, FAIL, sum(x.states for x in runs),
                               len(runs), 0, False, exact, notes,
                               {"instance": _describe(r.instance), "nominal": sorted(nominal),
                                "leader_support": sorted(r.instance.feasible(r.instance.leader).members),
                                "knowledge": [sorted(k) for k in r.knowledge]})
    groups = defaultdict(list)
    for r in runs:
        inst = r.instance
        groups[(inst.leader, inst.sets[inst.leader - 1].members, nominal_key(base, inst))].append(r)
    ok, cex = _compare_groups(groups, lambda r: leader_name(r.instance.leader), exact)
    verdict = PASS if ok else FAIL
    if ok and not exact:
        verdict = UNDECIDED
    return CheckResult("leader_leakage", fam.protocol, fam.name, verdict, sum(x.states for x in runs),
                       len(runs), len(groups), False, exact, notes, cex)


def reliability_check(protocol: str, family, budget=None, **opts) -> CheckResult:
    fam = _as_family(protocol, family, opts)
    runs = _runs(fam, budget)
    exact = all(r.exact for r in runs)
    for r in runs:
        if not r.reliable:
            return CheckResult("reliability", fam.protocol, fam.name, FAIL, sum(x.states for x in runs),
                               len(runs), exact=exact, counterexample={"instance": _describe(r.instance), **r.bad_run})
    return CheckResult("reliability", fam.protocol, fam.name, PASS, sum(x.states for x in runs), len(runs),
                       exact=exact)


def nominal_entropy_bits(protocol: str, instance: Instance, limit: int = 200_000) -> float | None:
    """Entropy of what the leader is entitled to learn, with a uniform prior on the others' sets.

    Each non-leader set is drawn uniformly among subsets of the alphabet
    with its declared size, conditioned on a non-empty joint intersection.
    Returns ``None`` when the prior has more than ``limit`` outcomes.
    """
    K = instance.K
    others = instance.non_leaders
    sizes = [instance.feasible(i).size for i in others]
    if math.prod(math.comb(K, n) for n in sizes) > limit:
        return None
    counts = defaultdict(int)
    base = protocol.replace("naive_", "")
    for choice in itertools.product(*(itertools.combinations(range(1, K + 1), n) for n in sizes)):
        sets = list(instance.sets)
        for i, members in zip(others, choice):
            sets[i - 1] = FeasibleSet(K, frozenset(members))
        try:
            cf = instance.replace(sets=tuple(sets))
        except EmptyIntersectionError:
            continue
        counts[nominal_key(base, cf)] += 1
    total = sum(counts.values())
    return -sum(c / total * math.log2(c / total) for c in counts.values())


CHECKS = {
    "database": zero_leakage_check,
    "leader": leader_leakage_check,
    "reliability": reliability_check,
}


def run_family(fam: AuditFamily, budget=None) -> list:
    return [CHECKS[c](fam.protocol, fam, budget=budget) for c in fam.checks]


def run_suite(families, budget=None) -> list:
    out = []
    for fam in families:
        out.extend(run_family(fam, budget))
    return out


def report(results, **meta) -> str:
    body = {
        **meta,
        "nominal_leakage_prior": "uniform over feasible sets consistent with the declared sizes",
        "checks": [r.as_dict() for r in results],
    }
    return json.dumps(body, indent=2, sort_keys=False, default=str)
