from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from folnerlab.errors import BudgetExceeded
from folnerlab.groups import (BaumslagSolitar12, Cyclic, Dyadic, FreeGroup, IntegerLattice,
                              Product, ball, group_from_json, growth_sequence)

from conftest import BS, bs_elements, dyadics, lattice_elements


def test_dyadic_canonical():
    assert Dyadic.make(4, 2) == Dyadic.make(1, 0)
    assert Dyadic.make(3, 1).to_fraction() == Fraction(3, 2)
    assert Dyadic.from_fraction(Fraction(5, 8)).shift(3) == Dyadic.make(5, 0)
    with pytest.raises(ValueError):
        Dyadic.from_fraction(Fraction(1, 3))


@given(dyadics(), dyadics())
def test_dyadic_arithmetic_matches_fractions(x, y):
    assert (x + y).to_fraction() == x.to_fraction() + y.to_fraction()
    assert (x - y).to_fraction() == x.to_fraction() - y.to_fraction()


@given(dyadics(), st.integers(-5, 5))
def test_dyadic_shift(x, t):
    assert x.shift(t).to_fraction() == x.to_fraction() * Fraction(2) ** t


@given(dyadics(), st.sampled_from([3, 5, 9, 15]))
def test_dyadic_mod_uses_inverse_of_two(x, q):
    f = x.to_fraction()
    assert (x.mod(q) * f.denominator - f.numerator) % q == 0


@given(bs_elements(), bs_elements(), bs_elements())
def test_bs_associative(g, h, k):
    assert BS.multiply(BS.multiply(g, h), k) == BS.multiply(g, BS.multiply(h, k))


@given(bs_elements())
def test_bs_inverse(g):
    assert BS.multiply(g, BS.inverse(g)) == BS.identity()
    assert BS.multiply(BS.inverse(g), g) == BS.identity()


def test_bs_relation():
    a, b = BS.a, BS.b
    assert BS.product(b, a, BS.inverse(b)) == BS.multiply(a, a)


@given(lattice_elements(3), lattice_elements(3))
def test_lattice_commutes(g, h):
    Z3 = IntegerLattice(3)
    assert Z3.multiply(g, h) == Z3.multiply(h, g)


def test_free_group_reduction():
    F2 = FreeGroup(2)
    a = F2.generators()[0]
    assert F2.multiply(a, F2.inverse(a)) == ()
    assert F2.word((0, 1), (1, 1), (1, -1)) == ((0, 1),)


def test_growth_sequences():
    assert growth_sequence(IntegerLattice(1), max_radius=4) == [1, 3, 5, 7, 9]
    assert growth_sequence(IntegerLattice(2), max_radius=3) == [1, 5, 13, 25]
    # free group of rank r: 1 + 2r((2r-1)^n - 1)/(2r-2)
    assert growth_sequence(FreeGroup(2), max_radius=4) == [1 + 2 * (3 ** n - 1) for n in range(5)]
    assert growth_sequence(Cyclic(5), max_radius=3) == [1, 3, 5, 5]


def test_ball_budget():
    with pytest.raises(BudgetExceeded):
        ball(FreeGroup(2), radius=10, budget=100)


def test_descriptor_round_trip():
    for G in (IntegerLattice(2), BS, FreeGroup(3), Cyclic(7), Product(Cyclic(2), IntegerLattice(1))):
        assert group_from_json(G.descriptor_json()) == G


@given(bs_elements())
def test_bs_element_json(g):
    assert BS.element_from_json(BS.element_to_json(g)) == g


def test_check_rejects_foreign_elements():
    with pytest.raises(Exception):
        BS.multiply((0, 0), BS.a)
