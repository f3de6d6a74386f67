import pytest
from hypothesis import given, strategies as st

from dofsp.field import (
    DimensionError,
    PrimeField,
    dot,
    is_prime,
    sample_uniform_element,
    sample_uniform_vector,
    smallest_prime_above,
)
from dofsp.randomness import enumerate_runs

PRIMES = [2, 3, 5, 7, 11, 13]


def test_primality_table():
    assert [n for n in range(30) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


@pytest.mark.parametrize("bound, q", [(0, 2), (1, 2), (2, 3), (3, 5), (4, 5), (5, 7), (13, 17)])
def test_smallest_prime_above(bound, q):
    assert smallest_prime_above(bound) == q


def test_composite_modulus_rejected():
    with pytest.raises(ValueError):
        PrimeField(4)


@given(st.sampled_from(PRIMES), st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50))
def test_field_axioms(q, a, b, c):
    F = PrimeField(q)
    a, b, c = F(a), F(b), F(c)
    assert F.add(a, F.add(b, c)) == F.add(F.add(a, b), c)
    assert F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c))
    assert F.add(a, F.neg(a)) == 0
    assert F.sub(a, b) == F.add(a, F.neg(b))
    if a:
        assert F.mul(a, F.inv(a)) == 1


def test_zero_has_no_inverse():
    with pytest.raises(ZeroDivisionError):
        PrimeField(5).inv(0)


@given(st.sampled_from(PRIMES), st.lists(st.integers(0, 100), min_size=1, max_size=6), st.data())
def test_vector_ops(q, xs, data):
    F = PrimeField(q)
    ys = data.draw(st.lists(st.integers(0, 100), min_size=len(xs), max_size=len(xs)))
    x, y = F.vector(xs), F.vector(ys)
    assert all(0 <= e < q for e in (x + y).entries)
    assert (x + y) - y == x
    assert dot(x, y) == sum(a * b for a, b in zip(xs, ys)) % q
    assert dot(x * y, F.ones(len(xs))) == dot(x, y)
    assert x.scale(q) == F.zeros(len(xs))


def test_dimension_and_field_mismatch():
    F5, F7 = PrimeField(5), PrimeField(7)
    with pytest.raises(DimensionError):
        F5.vector([1, 2]) + F5.vector([1, 2, 3])
    with pytest.raises(DimensionError):
        dot(F5.vector([1]), F7.vector([1]))


def test_unreduced_entries_rejected():
    from dofsp.field import FieldVector

    with pytest.raises(ValueError):
        FieldVector(PrimeField(3), (3,))


def test_unit_indicator_take():
    F = PrimeField(3)
    assert F.unit(4, 2).entries == (0, 0, 1, 0)
    assert F.indicator(4, [0, 3]).entries == (1, 0, 0, 1)
    assert F.vector([4, 5, 6]).take([2, 0]).entries == (0, 1)
    assert F.vector([1, 2, 0])[1:].entries == (2, 0)


def test_uniform_sampling_is_exactly_uniform():
    F = PrimeField(3)
    dist = {}
    for v, p in enumerate_runs(lambda rnd: sample_uniform_vector(rnd.for_party(1), 2, F).entries):
        dist[v] = dist.get(v, 0) + p
    assert len(dist) == 9 and set(dist.values()) == {dist[(0, 0)]}
    nz = [v for v, _ in enumerate_runs(lambda rnd: sample_uniform_element(rnd.for_party(1), F, nonzero=True))]
    assert nz == [1, 2]
