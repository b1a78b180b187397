import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from folnerlab.convexity import (check_eta, eta_quarter, fluctuation_bound, lower_ratio,
                                 uc_modulus)


def test_hilbert_value():
    u = uc_modulus(2)
    lo, hi = u.enclosure(Fraction(1, 2))
    exact = 1 - math.sqrt(15) / 4
    assert lo <= Fraction(exact) <= hi or abs(float(lo) - exact) < 1e-15
    assert hi - lo < Fraction(1, 10 ** 20)
    assert abs(u(Fraction(1, 2)) - 0.0317541634) < 1e-9


def test_clarkson_value():
    assert abs(uc_modulus(4)(1) - (1 - (15 / 16) ** 0.25)) < 1e-12


def test_rejects_bad_p():
    for p in (1, Fraction(1, 2), float("inf")):
        with pytest.raises(ValueError):
            uc_modulus(p)


@given(st.integers(1, 199), st.integers(1, 199))
def test_monotone_in_eps(a, b):
    u = uc_modulus(2)
    if a < b:
        assert u.enclosure(Fraction(a, 100))[1] <= u.enclosure(Fraction(b, 100))[0]


@pytest.mark.parametrize("p", [2, 3, 4, Fraction(3, 2), Fraction(5, 4)])
def test_sampled_inequality(p):
    assert uc_modulus(p).sampled_check(samples=10_000, dim=4, seed=1) > -1e-12


def test_bound_value():
    u = uc_modulus(2)
    eta = eta_quarter(u, Fraction(1, 2))
    assert 0 < u(Fraction(1, 2)) / 4 - float(eta) < 1e-12
    assert fluctuation_bound(u, Fraction(1, 2), eta, 1) == 125
    assert fluctuation_bound(u, Fraction(1, 2), eta, 1, 1) == 0
    # sharpened bound never exceeds the plain one
    assert fluctuation_bound(u, Fraction(1, 2), eta, 1, Fraction(1, 4)) <= 125


def test_eta_constraint():
    u = uc_modulus(2)
    with pytest.raises(ValueError):
        check_eta(u, Fraction(1, 2), Fraction(1, 60))
    check_eta(u, Fraction(1, 2), Fraction(1, 64))


@given(st.integers(1, 1000), st.integers(1, 1000))
def test_lower_ratio_below(a, b):
    eta, n2 = Fraction(a, 1000), Fraction(b, 100)
    r = lower_ratio(eta, n2)
    # r < eta / (3 ||x||)  <=>  9 r^2 n2 < eta^2
    assert 9 * r * r * n2 < eta * eta
    assert float(eta) / (3 * math.sqrt(float(n2))) - float(r) < 1e-12
