"""Star search: sequential multi-party PSI over the leader's runs.

The leader walks its runs ``J_1, J_2, ...`` (best value first) and checks
every element of the current run against all non-leaders at once. Element
number ``l`` in that walk is a *slot*. Entity ``i`` serves slot ``l`` with
vector ``h_k``, ``k = ceil(l / (N_i - 1))``, on database
``((l - 1) mod (N_i - 1)) + 2``; database 1 of ``E_i`` answers the bare
``h_k`` once. Answers are scaled by the non-leaders' shared multiplier ``c``
and carry correlated offsets ``t_hat`` that sum to ``q - (N - 1)`` per slot,
so the per-slot sum ``Z_u = c * (sum_i X_i(u) - (N - 1))`` vanishes exactly
on common elements.

``multiplier="global"`` uses one ``c`` for the whole run. Because every
``Z_u`` then shares the factor ``c``, ratios ``Z_u / Z_v`` expose how many
non-leaders lack each checked element; ``multiplier="per_slot"`` draws a
fresh ``c`` per slot and removes that channel. A database-1 answer is
shared by every slot on the same vector, so the per-slot variant needs
``N_i = 2`` at every non-leader.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .field import PrimeField, dot, sample_uniform_element, sample_uniform_vector, smallest_prime_above
from .model import Instance, LocalProfile
from .randomness import SHARED, SeededRandomness
from .transcript import Outcome, Transcript, db_name, leader_name

MUTATIONS = ("reveal-count",)
MULTIPLIERS = ("global", "per_slot")


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def psi_download(P1: int, Ns) -> int:
    return sum(ceil_div(P1 * n, n - 1) for n in Ns)


def leader_costs(instance: Instance) -> dict:
    """Worst-case PSI download cost for each choice of leader."""
    costs = {}
    for l in range(1, instance.N + 1):
        others = [instance.databases[i - 1] for i in range(1, instance.N + 1) if i != l]
        if min(others) < 2:
            costs[l] = math.inf
        else:
            costs[l] = psi_download(instance.feasible(l).size, others)
    return costs


def leader_candidates(instance: Instance) -> set:
    costs = leader_costs(instance)
    best = min(costs.values())
    return {l for l, c in costs.items() if c == best}


def select_leader(instance: Instance) -> int:
    return min(leader_candidates(instance))


def slot_position(l: int, n_dbs: int) -> tuple:
    """``(vector index k, database j)`` serving slot ``l`` at an entity with ``n_dbs`` databases."""
    return ceil_div(l, n_dbs - 1), (l - 1) % (n_dbs - 1) + 2


@dataclass
class StarRandomness:
    """Common randomness of the non-leaders, indexed as in the scheme.

    ``pools[i][k-1]`` is ``S_{i,k}``; ``t[(i, j)][k-1]`` is ``t_{i,j}(k)``;
    ``t_hat[(i, l)]`` is the same symbol indexed by slot.
    """

    q: int
    c: int
    pools: dict
    t: dict
    t_hat: dict = field(default_factory=dict)

    def slot_sum(self, l: int) -> int:
        return sum(v for (i, ll), v in self.t_hat.items() if ll == l) % self.q


def _correlated_slot(rng, entities, q: int) -> dict:
    """Offsets for one slot: free for all but the last entity, which closes the sum."""
    N = len(entities) + 1
    out = {}
    for i in entities[:-1]:
        out[i] = sample_uniform_element(rng, PrimeField(q))
    out[entities[-1]] = (q - (N - 1) - sum(out.values())) % q
    return out


def gen_correlated_randomness(rng, N: int, Ns, P1: int, q: int) -> StarRandomness:
    """Draw the full randomness up front for non-leaders ``2..N``.

    ``Ns`` lists ``N_2..N_N``.
    """
    Ns = list(Ns)
    if len(Ns) != N - 1:
        raise ValueError("need one database count per non-leader")
    if q <= N - 1:
        raise ValueError("q must exceed N - 1")
    F = PrimeField(q)
    entities = list(range(2, N + 1))
    t_hat = {}
    for l in range(1, P1 + 1):
        for i, v in _correlated_slot(rng, entities, q).items():
            t_hat[(i, l)] = v
    t = {}
    pools = {}
    for i, n in zip(entities, Ns):
        pools[i] = [sample_uniform_element(rng, F) for _ in range(ceil_div(P1, n - 1))]
        for j in range(2, n + 1):
            length = ceil_div(P1 - j + 1, n - 1)
            t[(i, j)] = [t_hat[(i, (k - 1) * (n - 1) + (j - 1))] for k in range(1, length + 1)]
    c = sample_uniform_element(rng, F, nonzero=True)
    return StarRandomness(q=q, c=c, pools=pools, t=t, t_hat=t_hat)


class StarState:
    """Mutable state of one star run. Randomness is drawn on first use."""

    def __init__(
        self,
        instance: Instance,
        randomness=None,
        mutation: str | None = None,
        multiplier: str = "global",
        debug: bool = False,
        c: int | None = None,
    ):
        if mutation is not None and mutation not in MUTATIONS:
            raise ValueError(f"unknown mutation {mutation!r}")
        if multiplier not in MULTIPLIERS:
            raise ValueError(f"multiplier must be one of {MULTIPLIERS}")
        if multiplier == "per_slot" and any(instance.databases[i - 1] != 2 for i in instance.non_leaders):
            raise ValueError("per-slot multipliers need exactly two databases per non-leader")
        randomness = randomness or SeededRandomness(instance.seed)
        self.instance = instance
        self.mutation = mutation
        self.multiplier = multiplier
        self.debug = debug
        self.leader = instance.leader
        self.entities = instance.non_leaders
        self.N = instance.N
        self.q = smallest_prime_above(self.N - 1)
        self.field = PrimeField(self.q)
        self.K = instance.K
        self.profile: LocalProfile = instance.leader_profile()
        self.n_dbs = {i: instance.databases[i - 1] for i in self.entities}
        self.X = {i: self.field.vector(instance.incidence(i).bits) for i in self.entities}
        self.transcript = Transcript(leader_name(self.leader))
        self._leader_rng = randomness.for_party(self.leader)
        self._rng = {i: randomness.for_party(i) for i in self.entities}
        self._shared = randomness.for_party(SHARED)
        self.h: list = []
        self.pools: dict = {i: [] for i in self.entities}
        self.t_hat: dict = {}
        self.c: dict = {}
        if c is not None:
            if c % self.q == 0:
                raise ValueError("the multiplier must be non-zero")
            self.c[1] = c % self.q
        self.sent_bare: dict = {i: set() for i in self.entities}
        self.slots_used = 0
        self.Z: dict = {}
        self.reference: dict = {}

    @property
    def me(self) -> str:
        return leader_name(self.leader)

    def _vector(self, k: int):
        while len(self.h) < k:
            self.h.append(sample_uniform_vector(self._leader_rng, self.K, self.field))
        return self.h[k - 1]

    def _pad(self, i: int, k: int) -> int:
        while len(self.pools[i]) < k:
            self.pools[i].append(sample_uniform_element(self._rng[i], self.field))
        return self.pools[i][k - 1]

    def _multiplier(self, l: int) -> int:
        if self.mutation == "reveal-count":
            return 1
        key = 1 if self.multiplier == "global" else l
        if key not in self.c:
            self.c[key] = sample_uniform_element(self._shared, self.field, nonzero=True)
        return self.c[key]

    def _answer(self, i: int, query, pad: int, offset: int, c: int) -> int:
        return c * (dot(query, self.X[i]) + pad + offset) % self.q

    def check(self, r: int, indices) -> dict:
        """Run one PSI pass over ``indices``; returns ``{u: Z_u}``."""
        tr = self.transcript
        Z = {}
        for u in indices:
            self.slots_used += 1
            l = self.slots_used
            c = self._multiplier(l)
            offsets = _correlated_slot(self._shared, self.entities, self.q)
            total = 0
            for i in self.entities:
                self.t_hat[(i, l)] = offsets[i]
                k, j = slot_position(l, self.n_dbs[i])
                h = self._vector(k)
                pad = self._pad(i, k)
                if k not in self.sent_bare[i]:
                    self.sent_bare[i].add(k)
                    tr.send(r, "psi", self.me, db_name(i, 1), h.entries, f"h{k}")
                    a1 = self._answer(i, h, pad, 0, c)
                    tr.send(r, "psi", db_name(i, 1), self.me, a1, f"h{k}")
                    self.reference.setdefault((i, k), a1)
                query = h + self.field.unit(self.K, u - 1)
                tr.send(r, "psi", self.me, db_name(i, j), query.entries, f"h{k}+e{u}")
                aj = self._answer(i, query, pad, offsets[i], c)
                tr.send(r, "psi", db_name(i, j), self.me, aj, f"h{k}+e{u}")
                total += aj - self.reference[(i, k)]
            Z[u] = total % self.q
            if self.debug:
                count = sum(self.X[i][u - 1] for i in self.entities)
                assert Z[u] == c * (count - (self.N - 1)) % self.q, "Z decoding mismatch"
        self.Z.update(Z)
        return Z


def star_round(state: StarState, r: int) -> tuple:
    """Check run ``J_r``; returns ``(Z values, decoded membership bits)``."""
    run = state.profile.runs[r - 1]
    Z = state.check(r, run)
    return Z, {u: int(z == 0) for u, z in Z.items()}


def star_closed_cost(R: int, alpha, Ns, skipped_last: bool = False) -> int:
    """Download cost ``sum_i ceil(A * N_i / (N_i - 1))`` with ``A`` the checked prefix size."""
    alpha = tuple(alpha)
    if not (1 <= R <= len(alpha)):
        raise ValueError("stopping round outside the profile")
    A = sum(alpha[: R - 1]) if skipped_last else sum(alpha[:R])
    return psi_download(A, Ns)


def run_star(
    instance: Instance,
    randomness=None,
    mutation: str | None = None,
    multiplier: str = "global",
    debug: bool = False,
    c: int | None = None,
) -> Outcome:
    """Run the star scheme; ``c`` pins the shared multiplier instead of drawing it."""
    state = StarState(instance, randomness, mutation, multiplier, debug, c)
    profile = state.profile
    L = profile.L
    solution = None
    hit = None
    for r in range(1, L + 1):
        if r == L and profile.alpha[L - 1] == 1:
            solution = frozenset(profile.runs[L - 1])
            hit = "skipped"
            break
        _, bits = star_round(state, r)
        found = frozenset(u for u, b in bits.items() if b)
        if found:
            solution = found
            hit = "found"
            break
    if solution is None:
        raise AssertionError("no run met the intersection")
    R = r
    Ns = [state.n_dbs[i] for i in state.entities]
    D = star_closed_cost(R, profile.alpha, Ns, skipped_last=(hit == "skipped"))
    return Outcome(
        protocol="star",
        solution=solution,
        labels=instance.alphabet.labels(solution),
        stopping_round=R,
        knowledge=profile.prefix(R),
        transcript=state.transcript,
        q=state.q,
        closed_form_cost={"D": D, "U": instance.K * D, "C": (instance.K + 1) * D},
        info={
            "alpha": list(profile.alpha),
            "runs": [list(run) for run in profile.runs],
            "hit": hit,
            "Z": dict(state.Z),
            "c": dict(state.c),
            "vectors": len(state.h),
            "multiplier": "fixed" if mutation == "reveal-count" else multiplier,
        },
    )


def naive_psi_star(instance: Instance, randomness=None, multiplier: str = "global") -> Outcome:
    """Check all of the leader's set in one PSI pass, then optimize locally."""
    state = StarState(instance, randomness, multiplier=multiplier)
    support = sorted(instance.feasible(state.leader).members)
    Z = state.check(1, support)
    common = frozenset(u for u, z in Z.items() if z == 0)
    best = instance.objective.ranking(common)[0]
    solution = frozenset(k for k in common if instance.objective.value(k) == best)
    R = next(r for r, run in enumerate(state.profile.runs, start=1) if solution & set(run))
    D = psi_download(len(support), [state.n_dbs[i] for i in state.entities])
    return Outcome(
        protocol="naive_star",
        solution=solution,
        labels=instance.alphabet.labels(solution),
        stopping_round=R,
        knowledge=frozenset(support),
        transcript=state.transcript,
        q=state.q,
        closed_form_cost={"D": D, "U": instance.K * D, "C": (instance.K + 1) * D},
        info={"intersection": sorted(common)},
    )
