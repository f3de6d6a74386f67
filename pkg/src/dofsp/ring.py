"""Ring search for N > 2 entities.

The alphabet is permuted so that equal objective values sit in consecutive
partitions ``I_1, I_2, ...`` (best value first). Round ``r`` runs CarPSI-ring
on partition ``r``: the leader sends ``h`` and ``h + X_1`` into two database
lanes, each entity multiplies elementwise by its own slice and adds its
round-``r`` pad, and the last entity returns a masked inner product. The
difference of the two answers is the number of common elements in the slice.
The first non-empty slice is opened with FindPSI-ring.

Entities are visited in ring order starting at the leader, so for leader
``l`` the ring is ``l, l+1, ..., N, 1, ..., l-1``.
"""

from __future__ import annotations

from .field import PrimeField, dot, sample_uniform_element, sample_uniform_vector, smallest_prime_above
from .model import GlobalProfile, Instance, global_profile, intersection_oracle
from .randomness import SeededRandomness
from .transcript import Outcome, Transcript, db_name, leader_name
from .two_party import ContractViolation


class CardinalityAmbiguity(ValueError):
    pass


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def round_assignment(N_eff: int, T: int) -> tuple:
    """Rounds served by each database lane, ``(R_1, ..., R_{N_eff})``.

    For even ``N_eff`` the pairs ``(1,2), (3,4), ...`` take turns; for odd
    ``N_eff`` consecutive pairs wrap around cyclically. Every round is served
    by exactly two lanes.
    """
    if N_eff < 2 or T < 1:
        raise ValueError("need N_eff >= 2 and T >= 1")
    if N_eff == 2:
        full = frozenset(range(1, T + 1))
        return (full, full)
    sets = []
    for j in range(1, N_eff + 1):
        if N_eff % 2 == 0:
            half = ceil_div(j, 2)
            ks = range(0, (2 * (T - half)) // N_eff + 1)
            rounds = {k * N_eff // 2 + half for k in ks}
        elif j % 2 == 1:
            ks = range(0, ceil_div(2 * T - j - 1, N_eff) + 1)
            rounds = {(k * N_eff) // 2 + (j + 1) // 2 for k in ks}
        else:
            ks = range(0, (2 * T - j) // N_eff + 1)
            rounds = {ceil_div(k * N_eff, 2) + j // 2 for k in ks}
        sets.append(frozenset(r for r in rounds if 1 <= r <= T))
    return tuple(sets)


def lanes_for_round(assignment: tuple, r: int) -> tuple:
    lanes = tuple(j for j, rounds in enumerate(assignment, start=1) if r in rounds)
    if len(lanes) != 2:
        raise AssertionError(f"round {r} served by lanes {lanes}, expected exactly two")
    return lanes


def ring_order(instance: Instance) -> list:
    l = instance.leader
    return [((l - 1 + k) % instance.N) + 1 for k in range(instance.N)]


def ring_field(profile: GlobalProfile) -> PrimeField:
    return PrimeField(smallest_prime_above(max(max(profile.mu), 2)))


class RingState:
    """Mutable state of one ring run."""

    def __init__(self, instance: Instance, randomness=None, debug: bool = False):
        randomness = randomness or SeededRandomness(instance.seed)
        self.instance = instance
        self.debug = debug
        self.profile = global_profile(instance.objective)
        self.field = ring_field(self.profile)
        self.q = self.field.q
        self.order = ring_order(instance)
        self.X = {
            i: self.field.vector(self.profile.apply(instance.incidence(i).bits)) for i in self.order
        }
        self.N_eff = instance.N_eff
        self.assignment = round_assignment(self.N_eff, self.profile.T)
        self.transcript = Transcript(leader_name(instance.leader))
        self._rng = {i: randomness.for_party(i) for i in self.order[1:]}
        self._leader_rng = randomness.for_party(instance.leader)
        self.S: dict = {}
        self.final_queries: dict = {}
        self.M: dict = {}

    @property
    def me(self) -> str:
        return leader_name(self.instance.leader)

    @property
    def last(self) -> int:
        return self.order[-1]

    def lanes(self, r: int) -> tuple:
        return lanes_for_round(self.assignment, r)

    def slice_of(self, i: int, r: int):
        s = self.profile.slots(r)
        return self.X[i][s.start : s.stop]

    def draw_pads(self, r: int) -> None:
        length = self.profile.mu[r - 1]
        for i in self.order[1:]:
            self.S[(i, r)] = sample_uniform_vector(self._rng[i], length, self.field)


def carpsi_ring(state: RingState, r: int) -> int:
    """Cardinality of the intersection on partition ``r``."""
    if r != len(state.M) + 1:
        raise ContractViolation("CarPSI-ring rounds must run in order")
    length = state.profile.mu[r - 1]
    if length >= state.q:
        raise CardinalityAmbiguity(f"slice length {length} needs q > {length}, have q = {state.q}")
    f = state.field
    state.draw_pads(r)
    a, b = state.lanes(r)
    h = sample_uniform_vector(state._leader_rng, length, f)
    queries = {a: h, b: h + state.slice_of(state.instance.leader, r)}
    tr = state.transcript
    first = state.order[1]
    for lane, Q in queries.items():
        tr.send(r, "carpsi", state.me, db_name(first, lane), Q.entries, f"Q1,{lane}")
    running = state.slice_of(state.instance.leader, r)
    for pos in range(1, len(state.order) - 1):
        i, nxt = state.order[pos], state.order[pos + 1]
        Xi = state.slice_of(i, r)
        running = running * Xi
        for lane in (a, b):
            queries[lane] = queries[lane] * Xi + state.S[(i, r)]
            tr.send(r, "carpsi", db_name(i, lane), db_name(nxt, lane), queries[lane].entries, f"Q{pos + 1},{lane}")
        if state.debug:
            assert queries[b] - queries[a] == running, "induction fact violated"
    XN = state.slice_of(state.last, r)
    pad = state.S[(state.last, r)][length - 1]
    answers = {}
    for lane in (a, b):
        answers[lane] = (dot(queries[lane], XN) + pad) % state.q
        tr.send(r, "carpsi", db_name(state.last, lane), state.me, answers[lane], f"A{lane}")
    state.final_queries[r] = queries
    M = (answers[b] - answers[a]) % state.q
    if state.debug:
        assert M == sum((running * XN).entries), "CarPSI-ring decoded the wrong cardinality"
    state.M[r] = M
    return M


def findpsi_ring(state: RingState, r: int, M: int) -> tuple:
    """Bits of the intersection on partition ``r`` (in permuted order)."""
    if M < 1:
        raise ContractViolation("FindPSI-ring needs a non-zero cardinality")
    if state.M.get(r) != M:
        raise ContractViolation("FindPSI-ring must follow CarPSI-ring on the same round")
    length = state.profile.mu[r - 1]
    a, b = state.lanes(r)
    tr = state.transcript
    if r < state.profile.T:
        for lane in (a, b):
            signal = sample_uniform_element(state._leader_rng, state.field)
            tr.send(r, "findpsi", state.me, db_name(state.last, lane), signal, "signal")
    XN = state.slice_of(state.last, r)
    pad = state.S[(state.last, r)]
    answers = {}
    for lane in (a, b):
        full = state.final_queries[r][lane] * XN + pad
        answers[lane] = full[: length - 1]
        tr.send(r, "findpsi", db_name(state.last, lane), state.me, answers[lane].entries, f"A'{lane}")
    head = [x % state.q for x in (answers[b] - answers[a]).entries]
    bits = tuple(head) + ((M - sum(head)) % state.q,)
    if state.debug:
        X, _ = intersection_oracle(state.instance)
        expect = state.profile.apply(X.bits)[state.profile.offset(r) : state.profile.offset(r) + length]
        assert bits == tuple(expect), "FindPSI-ring recovered the wrong slice"
    return bits


def ring_closed_cost(R: int, mu, N: int, T: int | None = None, full_hit: bool = False) -> int:
    """Total ring cost for a realized stopping partition ``R``.

    ``full_hit`` marks ``M_R = mu_R`` before the last partition, where the
    slice is known without FindPSI-ring. A singleton last partition is never
    queried at all.
    """
    mu = tuple(mu)
    T = len(mu) if T is None else T
    if not (1 <= R <= T) or len(mu) != T:
        raise ValueError("need 1 <= R <= T = len(mu)")
    K = sum(mu)
    before = sum(mu[: R - 1])
    mu_R = mu[R - 1]
    if R < T:
        cost = 2 * N * (before + mu_R) + 2 * (R - before)
        if mu_R == 1 or full_hit:
            cost -= 2 * mu_R
        return cost
    if mu_R > 1:
        return 2 * N * K + 2 * (R - 1 - before)
    return 2 * (N - 1) * (K - 1) + 2 * (T - 1)


def run_ring(instance: Instance, randomness=None, debug: bool = False) -> Outcome:
    state = RingState(instance, randomness, debug)
    profile = state.profile
    T = profile.T
    hit = None
    slice_bits = None
    for r in range(1, T + 1):
        mu_r = profile.mu[r - 1]
        if r == T and mu_r == 1:
            hit = "skipped"
            slice_bits = (1,)
            break
        M = carpsi_ring(state, r)
        if M == 0:
            continue
        if r < T and (mu_r == 1 or M == mu_r):
            hit = "full"
            slice_bits = (1,) * mu_r
        else:
            hit = "partial" if M < mu_r else "full"
            slice_bits = findpsi_ring(state, r, M)
        break
    if hit is None:
        raise AssertionError("no partition met the intersection")
    R = r
    part = profile.partitions[R - 1]
    solution = frozenset(k for k, bit in zip(part, slice_bits) if bit == 1)
    C = ring_closed_cost(R, profile.mu, instance.N, T, full_hit=(hit == "full" and R < T))
    return Outcome(
        protocol="ring",
        solution=solution,
        labels=instance.alphabet.labels(solution),
        stopping_round=R,
        knowledge=frozenset(k for p in profile.partitions[:R] for k in p),
        transcript=state.transcript,
        q=state.q,
        closed_form_cost={"C": C},
        info={
            "mu": list(profile.mu),
            "partitions": [list(p) for p in profile.partitions],
            "cardinalities": dict(state.M),
            "hit": hit,
            "round_costs": round_costs(state.transcript),
            "N_eff": state.N_eff,
            "lanes": {r: list(state.lanes(r)) for r in range(1, R + 1)},
        },
    )


def round_costs(transcript: Transcript) -> list:
    totals: dict = {}
    for m in transcript.messages:
        totals[m.round] = totals.get(m.round, 0) + m.symbols
    return [totals[r] for r in sorted(totals)]


def naive_psi_ring(instance: Instance, randomness=None) -> Outcome:
    """Full-length ring PSI, then local optimization. Costs ``2NK``."""
    randomness = randomness or SeededRandomness(instance.seed)
    profile = global_profile(instance.objective)
    field = ring_field(profile)
    order = ring_order(instance)
    K = instance.K
    tr = Transcript(leader_name(instance.leader))
    me = leader_name(instance.leader)
    X = {i: field.vector(instance.incidence(i).bits) for i in order}
    h = sample_uniform_vector(randomness.for_party(instance.leader), K, field)
    queries = {1: h, 2: h + X[order[0]]}
    for lane, Q in queries.items():
        tr.send(1, "psi", me, db_name(order[1], lane), Q.entries, f"Q1,{lane}")
    for pos in range(1, len(order) - 1):
        i, nxt = order[pos], order[pos + 1]
        S = sample_uniform_vector(randomness.for_party(i), K, field)
        for lane in (1, 2):
            queries[lane] = queries[lane] * X[i] + S
            tr.send(1, "psi", db_name(i, lane), db_name(nxt, lane), queries[lane].entries, f"Q{pos + 1},{lane}")
    last = order[-1]
    S = sample_uniform_vector(randomness.for_party(last), K, field)
    answers = {}
    for lane in (1, 2):
        answers[lane] = queries[lane] * X[last] + S
        tr.send(1, "psi", db_name(last, lane), me, answers[lane].entries, f"A{lane}")
    common = frozenset(k + 1 for k, v in enumerate((answers[2] - answers[1]).entries) if v == 1)
    best = instance.objective.ranking(common)[0]
    solution = frozenset(k for k in common if instance.objective.value(k) == best)
    R = next(r for r, p in enumerate(profile.partitions, start=1) if solution & set(p))
    return Outcome(
        protocol="naive_ring",
        solution=solution,
        labels=instance.alphabet.labels(solution),
        stopping_round=R,
        knowledge=frozenset(range(1, K + 1)),
        transcript=tr,
        q=field.q,
        closed_form_cost={"C": 2 * instance.N * K},
        info={"intersection": sorted(common)},
    )
