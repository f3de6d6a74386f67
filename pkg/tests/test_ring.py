import itertools

import numpy as np
import pytest

from dofsp.model import (
    Alphabet,
    FeasibleSet,
    Instance,
    Objective,
    fixture_path,
    global_profile,
    load_instances,
    solution_oracle,
)
from dofsp.randomness import SeededRandomness
from dofsp.ring import (
    RingState,
    carpsi_ring,
    findpsi_ring,
    lanes_for_round,
    naive_psi_ring,
    round_assignment,
    run_ring,
    ring_closed_cost,
)
from dofsp.two_party import ContractViolation


@pytest.fixture(scope="module")
def ex2():
    return load_instances(fixture_path("example2.json"))[0]


def test_round_assignment_worked_cases():
    assert round_assignment(4, 5) == ({1, 3, 5}, {1, 3, 5}, {2, 4}, {2, 4})
    assert round_assignment(3, 5) == ({1, 2, 4, 5}, {1, 3, 4}, {2, 3, 5})
    assert round_assignment(2, 7) == (set(range(1, 8)),) * 2


@pytest.mark.parametrize("n_eff", range(2, 9))
def test_round_assignment_covers_each_round_twice(n_eff):
    for T in range(1, 13):
        sets = round_assignment(n_eff, T)
        assert len(sets) == n_eff
        assert set().union(*sets) == set(range(1, T + 1))
        for r in range(1, T + 1):
            assert len(lanes_for_round(sets, r)) == 2


def test_ring_fixture_rounds(ex2):
    out = run_ring(ex2, debug=True)
    assert out.labels == ["G"]
    assert out.info["cardinalities"] == {1: 0, 2: 0, 3: 1}
    assert out.info["round_costs"] == [14, 14, 26]
    assert out.C == 54 == ring_closed_cost(3, (2, 2, 3, 2, 1), 4)
    assert out.q == 5


def test_ring_fixture_findpsi_slice(ex2):
    state = RingState(ex2, SeededRandomness(0), debug=True)
    assert [carpsi_ring(state, r) for r in (1, 2, 3)] == [0, 0, 1]
    assert findpsi_ring(state, 3, 1) == (0, 1, 0)


def test_primitive_contracts(ex2):
    state = RingState(ex2, SeededRandomness(0))
    with pytest.raises(ContractViolation):
        carpsi_ring(state, 2)
    carpsi_ring(state, 1)
    with pytest.raises(ContractViolation):
        findpsi_ring(state, 1, 0)


def test_full_alphabet_gives_full_cardinality():
    K = 4
    full = FeasibleSet(K, frozenset(range(1, K + 1)))
    inst = Instance(Alphabet.of_size(K), (full,) * 3, Objective((1, 1, 1, 2)), (2, 2, 2))
    state = RingState(inst, SeededRandomness(0))
    assert carpsi_ring(state, 1) == 1
    assert carpsi_ring(state, 2) == 3


def test_naive_ring(ex2):
    out = naive_psi_ring(ex2)
    assert out.C == 80 and out.labels == ["G"]
    two = Instance(Alphabet.of_size(1), (FeasibleSet(1, frozenset({1})),) * 2, Objective((1,)), (2, 2))
    assert naive_psi_ring(two).C == 4


@pytest.mark.parametrize(
    "R, mu, N, full, C",
    [
        (3, (2, 2, 3, 2, 1), 4, False, 54),
        (1, (1, 3), 3, True, 6),
        (3, (1, 1, 2), 3, False, 2 * 3 * 4),
        (2, (1, 1, 2), 3, False, 2 * 3 * 2 + 2 - 2),
        (3, (2, 1, 1), 3, False, 2 * 2 * 3 + 2 * 2),
    ],
)
def test_ring_closed_cost_cases(R, mu, N, full, C):
    assert ring_closed_cost(R, mu, N, full_hit=full) == C


def all_set_triples(K, count, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        sets = [frozenset(int(k) + 1 for k in np.flatnonzero(rng.integers(0, 2, K))) for _ in range(4)]
        if all(sets) and frozenset.intersection(*sets):
            out.append(sets)
    return out


@pytest.mark.parametrize("N", [3, 4])
def test_oracle_equivalence_and_bounds(N):
    for K in (2, 4, 6):
        for sets in all_set_triples(K, 12, K * 10 + N):
            sets = sets[:N]
            if not frozenset.intersection(*sets):
                continue
            for values in itertools.islice(itertools.product(range(1, 4), repeat=K), 0, None, 7):
                inst = Instance(Alphabet.of_size(K), tuple(FeasibleSet(K, s) for s in sets), Objective(values),
                                (2,) + (3,) * (N - 1))
                out = run_ring(inst, debug=True)
                assert out.solution == solution_oracle(inst)
                assert out.C == out.closed_form_cost["C"] <= 2 * N * K


def test_uses_two_lanes_per_round_with_more_databases(ex2):
    inst = ex2.replace(databases=(2, 3, 3, 4))
    out = run_ring(inst, debug=True)
    assert out.info["N_eff"] == 3
    assert out.info["lanes"] == {1: [1, 2], 2: [1, 3], 3: [2, 3]}
    # queries only move along one lane
    for m in out.transcript.messages:
        if m.phase == "carpsi" and ".db" in m.sender and ".db" in m.receiver:
            assert m.sender.split(".")[1] == m.receiver.split(".")[1]
