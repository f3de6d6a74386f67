import pytest
from hypothesis import given, settings, strategies as st

from dofsp.model import Alphabet, FeasibleSet, Instance, Objective, fixture_path, load_instances, solution_oracle
from dofsp.randomness import SeededRandomness
from dofsp.two_party import (
    ContractViolation,
    TwoPartyState,
    ceil_div,
    d_psi,
    naive_psi_two_party,
    run_two_party,
    two_party_closed_cost,
)


@pytest.fixture(scope="module")
def ex1():
    return {i.name: i for i in load_instances(fixture_path("example1.json"))}


def test_bundled_expectations(ex1):
    for inst in ex1.values():
        out = run_two_party(inst, debug=True)
        assert out.labels == inst.expected["solution"]
        assert out.D == inst.expected["D"]
        assert out.D == out.closed_form_cost["D"]
        assert (out.U, out.C) == (inst.K * out.D, (inst.K + 1) * out.D)


def test_mapping1_uses_findpsi(ex1):
    out = run_two_party(ex1["mapping1-N2=2"])
    assert out.info["hit"] == "partial"
    assert out.info["cardinalities"] == {1: 2}
    assert out.stopping_round == 1
    # the last element of J_1 is inferred from M, not queried
    assert out.info["fresh_vectors"] == 3


def test_mapping3_full_hit_on_singleton(ex1):
    out = run_two_party(ex1["mapping3-N2=2"])
    assert out.info["hit"] == "full"
    assert out.D == two_party_closed_cost(1, 1, 2, full_hit=True) == 2


def test_final_singleton_is_never_queried():
    inst = Instance(Alphabet.of_size(3), (FeasibleSet(3, frozenset({1, 2, 3})), FeasibleSet(3, frozenset({3}))),
                    Objective((3, 2, 1)), (1, 2))
    out = run_two_party(inst)
    assert out.info["hit"] == "skipped" and out.solution == {3}
    assert out.D == two_party_closed_cost(3, 1, 2, full_hit=False, skipped_last=True) == 4


def test_q_is_smallest_prime_above_largest_run(ex1):
    assert run_two_party(ex1["mapping1-N2=2"]).q == 5


def test_naive_baseline(ex1):
    inst = ex1["mapping1-N2=2"]
    out = naive_psi_two_party(inst)
    assert out.solution == solution_oracle(inst)
    assert out.D == d_psi(4, 2) == 8
    assert out.knowledge == inst.feasible(1).members


def test_contract_violations(ex1):
    state = TwoPartyState(ex1["mapping1-N2=2"], SeededRandomness(0))
    with pytest.raises(ContractViolation):
        state.findpsi(1, 1)
    with pytest.raises(ContractViolation):
        state.carpsi(2)
    M = state.carpsi(1)
    with pytest.raises(ContractViolation):
        state.findpsi(1, 3)
    assert M == 2
    with pytest.raises(ContractViolation):
        state.carpsi(5)


def test_rejects_more_than_two_entities():
    inst = load_instances(fixture_path("example2.json"))[0]
    with pytest.raises(ValueError):
        run_two_party(inst)


@pytest.mark.parametrize("s, n2, D", [(1, 2, 2), (3, 2, 6), (3, 3, 5), (3, 4, 4), (2, 4, 3), (5, 6, 6)])
def test_slot_packing(s, n2, D):
    assert ceil_div(s * n2, n2 - 1) == D


@st.composite
def instances(draw):
    K = draw(st.integers(2, 7))
    values = tuple(draw(st.lists(st.integers(1, 4), min_size=K, max_size=K)))
    a = draw(st.sets(st.integers(1, K), min_size=1))
    b = draw(st.sets(st.integers(1, K), min_size=1))
    b = b | {min(a)}
    n2 = draw(st.integers(2, 5))
    return Instance(Alphabet.of_size(K), (FeasibleSet(K, frozenset(a)), FeasibleSet(K, frozenset(b))),
                    Objective(values), (1, n2), seed=draw(st.integers(0, 99)))


@settings(max_examples=300, deadline=None)
@given(instances())
def test_random_instances(inst):
    out = run_two_party(inst, debug=True)
    assert out.solution == solution_oracle(inst)
    assert out.D == out.closed_form_cost["D"] <= d_psi(inst.feasible(1).size, inst.databases[1])
    assert out.info["fresh_vectors"] <= out.info["pool_size"]
    # every database 2..N2 serves at most one query per vector
    pairs = out.info["pairs"]
    assert len(pairs) == len(set(pairs))


@pytest.mark.parametrize("mutation", ["drop-mask", "reuse-pad"])
def test_mutations_still_decode(ex1, mutation):
    inst = ex1["mapping1-N2=2"]
    assert run_two_party(inst, mutation=mutation).solution == solution_oracle(inst)


def test_same_seed_same_transcript(ex1):
    inst = ex1["mapping2-N2=2"]
    assert run_two_party(inst).transcript.digest() == run_two_party(inst).transcript.digest()
    assert run_two_party(inst, SeededRandomness(1)).transcript.digest() != run_two_party(
        inst, SeededRandomness(2)).transcript.digest()
