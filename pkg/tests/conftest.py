from fractions import Fraction

from hypothesis import strategies as st

from folnerlab.groups import BaumslagSolitar12, Dyadic, IntegerLattice

BS = BaumslagSolitar12()


def dyadics(max_num=40, max_exp=4):
    return st.builds(Dyadic.make, st.integers(-max_num, max_num), st.integers(0, max_exp))


def bs_elements(max_num=40, max_exp=4, max_level=4):
    return st.builds(lambda x, n: (x, n), dyadics(max_num, max_exp),
                     st.integers(-max_level, max_level))


def lattice_elements(d, bound=6):
    return st.tuples(*[st.integers(-bound, bound)] * d)


rationals = st.builds(Fraction, st.integers(-20, 20), st.integers(1, 12))
