import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from folnerlab.convexity import eta_quarter, uc_modulus
from folnerlab.dynamics import (EXACT_BS_LEVEL, Observable, average_set, averaging_lemma_check,
                                bishop_upcrossings_check, ergodic_average, koopman_cyclic,
                                make_bs12_affine_system, make_torus_system, mean_projection,
                                random_observable, rate_from_limit_norm, slow_rate_demo,
                                symbolic_bs12_average, verify_fast_corollary,
                                verify_main_bound)
from folnerlab.errors import CertificateError, DescriptorMismatch, FolnerLabError
from folnerlab.folner import (FolnerSchedule, box_schedule, bs12_schedule, constant_schedule,
                              fast_refine, interval_schedule, subsequence)
from folnerlab.groups import IntegerLattice
from folnerlab.subsets import DyadicRows, FiniteSubset, LatticeBox

from conftest import BS

Z1 = IntegerLattice(1)


def interval_sets(a, b):
    return constant_schedule(LatticeBox(Z1, (a,), (b,)))


def indicator(sys, pts):
    return Observable(sys, [1 if x in pts else 0 for x in sys.points])


def test_systems():
    T = make_torus_system(1, 4)
    T.check_invariants()
    assert T.orbits() == [[0, 1, 2, 3]]
    T2 = make_torus_system(2, 3)
    assert T2.act((1, 0), (2, 2)) == (0, 2)
    B = make_bs12_affine_system(5)
    B.check_invariants()
    bab = BS.product(BS.b, BS.a, BS.inverse(BS.b))
    assert all(B.act(bab, y) == (y + 2) % 5 == B.act(BS.multiply(BS.a, BS.a), y) for y in range(5))
    with pytest.raises(ValueError):
        make_bs12_affine_system(6)


def test_average_examples():
    T = make_torus_system(1, 4)
    f = indicator(T, {(0,)})
    assert set(ergodic_average(T, interval_sets(0, 3), 1, f).values) == {Fraction(1, 4)}
    assert ergodic_average(T, interval_sets(0, 1), 1, f).values == (
        Fraction(1, 2), 0, 0, Fraction(1, 2))
    c = Observable(T, [3] * 4)
    assert ergodic_average(T, box_schedule(1), 5, c) == c


def test_descriptor_mismatch():
    T = make_torus_system(2, 3)
    with pytest.raises(DescriptorMismatch):
        ergodic_average(T, box_schedule(1), 1, Observable(T, [0] * 9))


def test_mean_projection():
    T = make_torus_system(1, 4)
    f = indicator(T, {(0,)})
    assert set(mean_projection(T, f).values) == {Fraction(1, 4)}
    B = make_bs12_affine_system(5)
    assert set(mean_projection(B, indicator(B, {0})).values) == {Fraction(1, 5)}


systems = st.sampled_from([(1, 5), (2, 4), (1, 8)])


@given(systems, st.integers(1, 6), st.integers(0, 10 ** 6))
@settings(max_examples=40, deadline=None)
def test_torus_average_matches_brute(dn, n, seed):
    d, N = dn
    T = make_torus_system(d, N)
    f = random_observable(T, random.Random(seed))
    box = LatticeBox.cube(d, n)
    fast = average_set(T, box, f)
    slow = average_set(T, FiniteSubset(box.group, box.materialize()), f)
    assert fast == slow
    # nonexpansive and commutes with the projection
    assert fast.norm_sq() <= f.norm_sq()
    P = mean_projection(T, f)
    assert average_set(T, box, P) == P
    assert mean_projection(T, P) == P


@given(st.sampled_from([3, 5, 9, 11]), st.integers(1, 3), st.integers(0, 10 ** 6))
@settings(max_examples=30, deadline=None)
def test_bs12_average_paths_agree(q, k, seed):
    B = make_bs12_affine_system(q)
    f = random_observable(B, random.Random(seed))
    F = DyadicRows.inverse_rectangle(4 ** k, k)
    brute = brute_average(B, F, f)
    assert average_set(B, F, f).values == brute
    assert symbolic_bs12_average(B, k, f).center == brute


def brute_average(sys, F, f):
    out = []
    for x in sys.points:
        s = sum(f.values[sys.index[sys.act(g, x)]] for g in F.materialize())
        out.append(s / F.cardinality())
    return tuple(out)


def test_bs12_enclosure_beyond_exact_level():
    B = make_bs12_affine_system(9)
    f = random_observable(B, random.Random(3))
    enc = symbolic_bs12_average(B, EXACT_BS_LEVEL + 5, f)
    assert not enc.exact and enc.radius < Fraction(1, 2 ** 1000)
    assert set(enc.center) == {f.mean()}


def test_mean_ergodic_convergence_full_period():
    T = make_torus_system(2, 4)
    f = random_observable(T, random.Random(0))
    sch = FolnerSchedule(T.group, lambda n: LatticeBox(T.group, (0, 0), (4 * n - 1, 4 * n - 1)), "p")
    assert ergodic_average(T, sch, 2, f) == mean_projection(T, f)


def test_averaging_lemma():
    T = make_torus_system(2, 8)
    sch = box_schedule(2)
    f = random_observable(T, random.Random(1))
    assert averaging_lemma_check(T, sch, sch.modulus, 2, Fraction(1, 4), f).verdict
    inv = Observable(T, [2] * 64)
    r = averaging_lemma_check(T, sch, sch.modulus, 2, Fraction(1, 4), inv)
    assert r.verdict and r.observed == 0
    # K = N = 1 with a tiny eta is not a modulus
    g = indicator(T, {(0, 0)})
    bad = averaging_lemma_check(T, sch, lambda n, e: 1, 1, Fraction(1, 100), g)
    assert not bad.verdict and bad.observed > 0


def test_main_bound():
    T = make_torus_system(2, 8)
    sch = box_schedule(2)
    u = uc_modulus(2)
    eps = Fraction(1, 2)
    eta = eta_quarter(u, eps)
    f = random_observable(T, random.Random(2))
    r = verify_main_bound(T, sch, sch.stated_modulus, f, eps, eta, 24)
    assert r.verdict and r.bound <= 125
    assert r.to_json()["verdict"] == "pass"
    zero = Observable(T, [0] * 64)
    assert verify_main_bound(T, sch, sch.modulus, zero, eps, eta, 5).observed == 0
    with pytest.raises(ValueError):
        verify_main_bound(T, sch, sch.modulus, f, eps, Fraction(1, 10), 5)


def test_main_bound_counts_real_fluctuations():
    # small distance exercises the counting path with a nonzero count
    T = make_torus_system(1, 16)
    sch = FolnerSchedule(T.group, lambda n: LatticeBox(T.group, (0,), (n % 3,)), "wobble")
    f = indicator(T, {(0,)})
    u = uc_modulus(2)
    eps = Fraction(1, 8)
    r = verify_main_bound(T, sch, lambda n, e: n + 1, f, eps, eta_quarter(u, eps), 12)
    assert r.observed > 0


def test_fast_corollary():
    T = make_torus_system(2, 8)
    u = uc_modulus(2)
    eps = Fraction(1, 2)
    eta = eta_quarter(u, eps)
    pre = fast_refine(box_schedule(2), 1, eta / 3, 4)
    f = random_observable(T, random.Random(5))
    r = verify_fast_corollary(T, pre, 4, 1, f, eps, eta)
    assert r.verdict and r.bound <= 125 + 1
    with pytest.raises(FolnerLabError):
        verify_fast_corollary(T, box_schedule(2), 4, 1, f, eps, eta)


def test_slow_rate():
    for d, n in ((1, 3), (2, 2)):
        r = slow_rate_demo(box_schedule(d), lambda k: Fraction(1, 2 ** k), n)
        assert r.verdict and r.extra["unitNorm"] and r.extra["meanZero"]
        assert r.extra["normAnf"] > 1 - float(r.bound)
    with pytest.raises(ValueError):
        slow_rate_demo(box_schedule(1), lambda k: 1, 2)


def test_bishop():
    T = make_torus_system(1, 12)
    f = indicator(T, {(0,), (1,), (2,)})
    r1 = bishop_upcrossings_check(T, f, Fraction(1, 8), Fraction(3, 8), 1)
    assert r1.verdict and r1.bound == 1
    assert bishop_upcrossings_check(T, f, Fraction(1, 8), Fraction(3, 8), 2).verdict
    c = Observable(T, [Fraction(1, 10)] * 12)
    assert bishop_upcrossings_check(T, c, Fraction(1, 5), Fraction(1, 2), 1).observed == 0


def test_rate_from_limit_norm():
    T = koopman_cyclic(4)
    f = np.array([1.0, 0, 0, 0])
    c = rate_from_limit_norm(T, f, 0.25, 0.1)
    assert c.passed and c.max_gap < 0.1
    assert rate_from_limit_norm(np.eye(4), f, 0.5, 0.1).m == 1
    assert rate_from_limit_norm(T, f, 0.25, 5.0).m == 1
    with pytest.raises(ValueError):
        rate_from_limit_norm(2 * np.eye(4), f, 0.5, 0.1)


def test_observable_io():
    T = make_torus_system(2, 3)
    f = random_observable(T, random.Random(9))
    assert Observable.from_csv(T, f.to_csv()) == f
    assert Observable.from_json(T, f.to_json()) == f
