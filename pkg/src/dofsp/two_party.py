"""Two-entity search: sequential CarPSI over the leader's runs, then FindPSI.

Queries are built from random vectors ``h_k``. Database 1 of the server
always receives the bare ``h_k``; databases ``2..N_2`` each receive one
``h_k + offset`` query, after which a fresh vector is drawn. Every answer is
padded with the common-randomness symbol ``S_k`` tied to its vector, so the
leader only learns the offsets' dot products with ``X_2``.

Each offset query is a *slot*. Slots are handed out greedily (lowest vector,
then lowest unused database), which gives ``D = ceil(s * N_2 / (N_2 - 1))``
downloads for ``s`` slots.
"""

from __future__ import annotations

from dataclasses import dataclass

from .field import PrimeField, dot, sample_uniform_element, sample_uniform_vector, smallest_prime_above
from .model import Instance, LocalProfile
from .randomness import SeededRandomness
from .transcript import Outcome, Transcript, db_name, leader_name

MUTATIONS = ("drop-mask", "reuse-pad")


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


class ContractViolation(ValueError):
    pass


@dataclass
class _Vector:
    h: object
    pad: int
    reference: int  # answer of database 1 to the bare vector
    used: set


class TwoPartyState:
    """Mutable state of one two-party run."""

    def __init__(self, instance: Instance, randomness=None, mutation: str | None = None, debug: bool = False):
        if instance.N != 2:
            raise ValueError("the two-party scheme needs exactly two entities")
        if mutation is not None and mutation not in MUTATIONS:
            raise ValueError(f"unknown mutation {mutation!r}")
        randomness = randomness or SeededRandomness(instance.seed)
        self.instance = instance
        self.mutation = mutation
        self.debug = debug
        self.leader = instance.leader
        self.server = instance.non_leaders[0]
        self.profile: LocalProfile = instance.leader_profile()
        self.q = smallest_prime_above(max(self.profile.alpha))
        self.field = PrimeField(self.q)
        self.K = instance.K
        self.N2 = instance.databases[self.server - 1]
        self.X2 = self.field.vector(instance.incidence(self.server).bits)
        self.pool_size = ceil_div(instance.feasible(self.leader).size, self.N2 - 1)
        self.pool: list[int] = []
        self.vectors: list[_Vector] = []
        self.pairs: list[tuple] = []
        self.transcript = Transcript(leader_name(self.leader))
        self._leader_rng = randomness.for_party(self.leader)
        self._server_rng = randomness.for_party(self.server)
        self.M: dict[int, int] = {}

    # -- plumbing -----------------------------------------------------------

    @property
    def me(self) -> str:
        return leader_name(self.leader)

    def _db(self, n: int) -> str:
        return db_name(self.server, n)

    def _answer(self, query, pad: int) -> int:
        a = dot(query, self.X2)
        if self.mutation != "drop-mask":
            a = (a + pad) % self.q
        return a

    def _exchange(self, r: int, phase: str, n: int, query, pad: int, label: str) -> int:
        self.transcript.send(r, phase, self.me, self._db(n), query.entries, label)
        answer = self._answer(query, pad)
        self.transcript.send(r, phase, self._db(n), self.me, answer, label)
        return answer

    def _fresh_vector(self, r: int, phase: str) -> _Vector:
        if len(self.pool) >= self.pool_size:
            raise AssertionError("common randomness pool exhausted")
        h = sample_uniform_vector(self._leader_rng, self.K, self.field)
        pad = sample_uniform_element(self._server_rng, self.field)
        self.pool.append(pad)
        k = len(self.vectors) + 1
        ref = self._exchange(r, phase, 1, h, pad, f"h{k}")
        vec = _Vector(h, pad, ref, set())
        self.vectors.append(vec)
        return vec

    def _slot(self, r: int, phase: str):
        """Pick the next (vector, database) pair for an offset query."""
        if self.mutation == "reuse-pad" and self.vectors:
            vec = self.vectors[-1]
            n = 2
        else:
            if not self.vectors or len(self.vectors[-1].used) == self.N2 - 1:
                self._fresh_vector(r, phase)
            vec = self.vectors[-1]
            n = min(set(range(2, self.N2 + 1)) - vec.used)
        vec.used.add(n)
        k = len(self.vectors)
        self.pairs.append((k, n))
        return k, vec, n

    def _offset_query(self, r: int, phase: str, offset, label: str) -> int:
        k, vec, n = self._slot(r, phase)
        answer = self._exchange(r, phase, n, vec.h + offset, vec.pad, f"h{k}+{label}")
        return (answer - vec.reference) % self.q

    # -- primitives ---------------------------------------------------------

    def carpsi(self, r: int) -> int:
        if not (1 <= r <= self.profile.L):
            raise ContractViolation(f"round {r} outside 1..{self.profile.L}")
        if r != len(self.M) + 1:
            raise ContractViolation("CarPSI rounds must run in order")
        run = self.profile.runs[r - 1]
        offset = self.field.indicator(self.K, [j - 1 for j in run])
        M = self._offset_query(r, "carpsi", offset, "X_J%d" % r)
        if self.debug:
            assert M == dot(offset, self.X2), "CarPSI decoded the wrong cardinality"
        self.M[r] = M
        return M

    def findpsi(self, r: int, M: int) -> dict:
        """Recover ``X_2`` on ``J_r``; returns ``{index: bit}``."""
        alpha = self.profile.alpha[r - 1]
        if not (1 <= M <= alpha - 1):
            raise ContractViolation(f"FindPSI needs 1 <= M <= {alpha - 1}, got {M}")
        if self.M.get(r) is None:
            raise ContractViolation("FindPSI requires CarPSI on the same round first")
        run = self.profile.runs[r - 1]
        omitted = max(run)
        bits = {}
        for j in run:
            if j == omitted:
                continue
            bits[j] = self._offset_query(r, "findpsi", self.field.unit(self.K, j - 1), f"e{j}")
        bits[omitted] = M - sum(bits.values())
        if self.debug:
            for j, b in bits.items():
                assert b == self.X2[j - 1]
        return bits

    def retrieve(self, indices, r: int = 1, phase: str = "psi") -> dict:
        """Per-index SPIR retrieval of ``X_2`` (used by the naive baseline)."""
        return {j: self._offset_query(r, phase, self.field.unit(self.K, j - 1), f"e{j}") for j in sorted(indices)}

    @property
    def fresh_vectors(self) -> int:
        return len(self.vectors)


def two_party_closed_cost(R: int, alpha_R: int, N2: int, full_hit: bool, skipped_last: bool = False) -> int:
    """Download cost of the two-party scheme for a realized stopping round.

    ``skipped_last`` covers the run where the final singleton run is never
    queried, leaving ``R - 1`` CarPSI slots.
    """
    if R < 1 or alpha_R < 1 or N2 < 2:
        raise ValueError("need R >= 1, alpha_R >= 1, N2 >= 2")
    if skipped_last:
        slots = R - 1
    elif full_hit:
        slots = R
    else:
        slots = R + alpha_R - 1
    return ceil_div(slots * N2, N2 - 1)


def run_two_party(instance: Instance, randomness=None, mutation: str | None = None, debug: bool = False) -> Outcome:
    state = TwoPartyState(instance, randomness, mutation, debug)
    profile = state.profile
    L = profile.L
    solution = None
    hit = None
    for r in range(1, L + 1):
        if r < L or profile.alpha[L - 1] > 1:
            M = state.carpsi(r)
            if 1 <= M <= profile.alpha[r - 1] - 1:
                bits = state.findpsi(r, M)
                solution = frozenset(j for j, b in bits.items() if b == 1)
                hit = "partial"
                break
            if M == profile.alpha[r - 1]:
                solution = frozenset(profile.runs[r - 1])
                hit = "full"
                break
        else:
            solution = frozenset(profile.runs[r - 1])
            hit = "skipped"
    if solution is None:
        raise AssertionError("no run met the intersection")
    R = r
    D = two_party_closed_cost(R, profile.alpha[R - 1], state.N2, hit == "full", hit == "skipped")
    return Outcome(
        protocol="two_party",
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
            "cardinalities": dict(state.M),
            "hit": hit,
            "fresh_vectors": state.fresh_vectors,
            "pool_size": state.pool_size,
            "pairs": list(state.pairs),
        },
    )


def naive_psi_two_party(instance: Instance, randomness=None) -> Outcome:
    """Retrieve the whole intersection by per-index SPIR, then optimize locally."""
    state = TwoPartyState(instance, randomness)
    support = sorted(instance.feasible(state.leader).members)
    bits = state.retrieve(support)
    common = frozenset(j for j, b in bits.items() if b == 1)
    objective = instance.objective
    best = objective.ranking(common)[0]
    solution = frozenset(k for k in common if objective.value(k) == best)
    P1 = len(support)
    D = d_psi(P1, state.N2)
    return Outcome(
        protocol="naive_two_party",
        solution=solution,
        labels=instance.alphabet.labels(solution),
        stopping_round=profile_round(state.profile, solution),
        knowledge=frozenset(support),
        transcript=state.transcript,
        q=state.q,
        closed_form_cost={"D": D, "U": instance.K * D, "C": (instance.K + 1) * D},
        info={"intersection": sorted(common)},
    )


def d_psi(P1: int, N2: int) -> int:
    return ceil_div(P1 * N2, N2 - 1)


def profile_round(profile: LocalProfile, solution: frozenset) -> int:
    for r, run in enumerate(profile.runs, start=1):
        if solution & set(run):
            return r
    raise ValueError("solution not inside the leader's runs")
