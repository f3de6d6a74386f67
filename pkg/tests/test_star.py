import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dofsp.model import Alphabet, FeasibleSet, Instance, Objective, fixture_path, load_instances, solution_oracle
from dofsp.randomness import SeededRandomness
from dofsp.star import (
    StarState,
    gen_correlated_randomness,
    leader_candidates,
    naive_psi_star,
    psi_download,
    run_star,
    select_leader,
    slot_position,
    star_closed_cost,
)


@pytest.fixture(scope="module")
def ex3():
    return {i.name: i for i in load_instances(fixture_path("example3.json"))}


def test_star_fixture_costs(ex3):
    for inst in ex3.values():
        out = run_star(inst, debug=True)
        assert out.labels == ["G"]
        assert (out.D, out.U, out.C) == (inst.expected["D"], inst.expected["U"], inst.expected["C"])
        assert out.D == out.closed_form_cost["D"]


def test_star_fixture_z_coefficients(ex3):
    inst = ex3["star-Ni=2"]
    idx = {x: inst.alphabet.index_of(x) for x in "CDJG"}
    for c in range(1, 5):
        Z = run_star(inst, c=c).info["Z"]
        assert {x: Z[k] for x, k in idx.items()} == {"C": 4 * c % 5, "D": 3 * c % 5, "J": 3 * c % 5, "G": 0}


def test_leader_choice(ex3):
    inst = ex3["star-Ni=2"]
    assert leader_candidates(inst) == {1}
    assert select_leader(inst) == 1


@pytest.mark.parametrize("l, n, pos", [(1, 2, (1, 2)), (2, 2, (2, 2)), (1, 3, (1, 2)), (2, 3, (1, 3)), (3, 3, (2, 2))])
def test_slot_position(l, n, pos):
    assert slot_position(l, n) == pos


@pytest.mark.parametrize("N, q", [(3, 3), (4, 5), (6, 7)])
def test_correlated_offsets_sum(N, q):
    rng = np.random.default_rng(N)
    sr = gen_correlated_randomness(rng, N, [2] * (N - 1), 5, q)
    for l in range(1, 6):
        assert sr.slot_sum(l) == (q - (N - 1)) % q
    assert sr.c != 0
    with pytest.raises(ValueError):
        gen_correlated_randomness(rng, N, [2] * (N - 1), 5, N - 1)


@st.composite
def star_instances(draw):
    K = draw(st.integers(2, 6))
    N = draw(st.integers(3, 5))
    values = tuple(draw(st.lists(st.integers(1, 3), min_size=K, max_size=K)))
    common = draw(st.integers(1, K))
    sets = tuple(FeasibleSet(K, frozenset(draw(st.sets(st.integers(1, K)))) | {common}) for _ in range(N))
    dbs = (1,) + tuple(draw(st.integers(2, 4)) for _ in range(N - 1))
    return Instance(Alphabet.of_size(K), sets, Objective(values), dbs, seed=draw(st.integers(0, 50)))


@settings(max_examples=200, deadline=None)
@given(star_instances())
def test_zero_test_is_sound(inst):
    out = run_star(inst, debug=True)
    assert out.solution == solution_oracle(inst)
    common = set.intersection(*(set(s.members) for s in inst.sets))
    for u, z in out.info["Z"].items():
        assert (z == 0) == (u in common)
    P1 = inst.feasible(1).size
    assert out.D == out.closed_form_cost["D"] <= psi_download(P1, inst.databases[1:])


def test_cost_grows_with_stopping_round():
    alpha, Ns = (2, 1, 3, 1), (2, 3)
    costs = [star_closed_cost(R, alpha, Ns) for R in range(1, 5)]
    assert costs == sorted(costs) and len(set(costs)) == 4
    assert star_closed_cost(4, alpha, Ns) == psi_download(7, Ns)
    assert star_closed_cost(4, alpha, Ns, skipped_last=True) == star_closed_cost(3, alpha, Ns)


def test_naive_star(ex3):
    inst = ex3["star-Ni=2"]
    out = naive_psi_star(inst)
    assert out.D == 30 and out.labels == ["G"]
    assert out.knowledge == inst.feasible(1).members


def test_multiplier_options(ex3):
    inst = ex3["star-Ni=2"]
    out = run_star(inst, multiplier="per_slot", debug=True)
    assert out.labels == ["G"] and len(out.info["c"]) > 1
    with pytest.raises(ValueError):
        run_star(ex3["star-Ni=3"], multiplier="per_slot")
    with pytest.raises(ValueError):
        run_star(inst, c=5)
    Z = run_star(inst, mutation="reveal-count").info["Z"]
    # with c = 1 each Z is the raw count of missing non-leaders, negated
    assert Z[inst.alphabet.index_of("C")] == 4


def test_bare_vector_sent_once_per_entity(ex3):
    state = StarState(ex3["star-Ni=3"], SeededRandomness(0))
    state.check(1, [3, 4])
    bare = [m for m in state.transcript.messages if m.label == "h1" and m.receiver.endswith("db1")]
    assert len(bare) == 3
