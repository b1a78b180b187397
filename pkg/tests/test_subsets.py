from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from folnerlab.errors import BudgetExceeded, DescriptorMismatch
from folnerlab.groups import BaumslagSolitar12, Cyclic, IntegerLattice
from folnerlab.subsets import DyadicRows, FiniteSubset, LatticeBox

from conftest import BS, bs_elements, lattice_elements

Z2 = IntegerLattice(2)


def plain(F):
    return FiniteSubset(F.group, F.materialize())


boxes = st.tuples(st.integers(-3, 3), st.integers(0, 4), st.integers(-3, 3), st.integers(0, 4)).map(
    lambda t: LatticeBox(Z2, (t[0], t[2]), (t[0] + t[1], t[2] + t[3])))

rects = st.tuples(st.integers(0, 5), st.integers(0, 2), st.booleans()).map(
    lambda t: DyadicRows.inverse_rectangle(t[0], t[1]) if t[2] else DyadicRows.rectangle(t[0], t[1]))


@given(boxes, lattice_elements(2, 8))
def test_box_overlap_matches_brute(F, g):
    assert F.translate_overlap(g) == plain(F).translate_overlap(g)
    assert F.left_translate(g).materialize() == plain(F).left_translate(g).materialize()


@given(boxes, st.integers(1, 6))
def test_box_residue_counts(F, N):
    brute = Counter(tuple(c % N for c in x) for x in F.materialize())
    assert F.residue_counts(N) == brute


@given(rects, bs_elements(max_num=12, max_exp=3, max_level=3))
@settings(max_examples=150)
def test_dyadic_rows_translate_matches_brute(F, g):
    P = plain(F)
    assert F.translate_overlap(g) == P.translate_overlap(g)
    assert F.left_translate(g).materialize() == P.left_translate(g).materialize()
    assert F.right_translate(g).materialize() == P.right_translate(g).materialize()


@given(rects, bs_elements(max_num=12, max_exp=3, max_level=3))
def test_dyadic_rows_membership(F, g):
    assert (g in F) == (g in F.materialize())


def test_rectangle_size_and_inverse():
    R = DyadicRows.rectangle(4, 1)
    assert R.cardinality() == 9 * 3
    assert DyadicRows.inverse_rectangle(4, 1).materialize() == plain(R).inverse().materialize()


@given(rects, st.sampled_from([3, 5, 9]))
def test_affine_counts_brute(F, q):
    brute = Counter((pow(2, n, q), x.mod(q)) for x, n in F.materialize())
    assert F.affine_counts(q) == brute


def test_budget_on_materialize():
    with pytest.raises(BudgetExceeded):
        DyadicRows.rectangle(4 ** 10, 10).materialize(budget=1000)


def test_set_algebra_and_mismatch():
    A = FiniteSubset(Z2, [(0, 0), (1, 0)])
    B = FiniteSubset(Z2, [(1, 0), (2, 0)])
    assert (A | B).cardinality() == 3
    assert (A & B).materialize() == {(1, 0)}
    assert (A ^ B).cardinality() == 2
    assert (A - B).materialize() == {(0, 0)}
    with pytest.raises(DescriptorMismatch):
        A | FiniteSubset(Cyclic(3), [0])


def test_product_set():
    A = FiniteSubset(Z2, [(0, 0), (1, 0)])
    assert A.product_set(A).cardinality() == 3
