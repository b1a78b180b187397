"""Moduli of uniform convexity for L^p and the fluctuation bound they drive."""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exact import as_fraction, enclose, exact_floor, positive


@dataclass(frozen=True)
class UCModulus:
    """``u(eps)`` with ``||x|| <= ||y|| <= 1, ||x-y|| >= eps  =>  ||(x+y)/2|| <= ||y|| - u(eps)``.

    kinds: ``hilbert`` (p = 2), ``clarkson`` (p > 2), ``hanner`` (1 < p < 2).
    """
    p: Fraction
    kind: str

    def iv(self, ctx, eps):
        """The formula evaluated in an mpmath context (``mpmath.iv`` for enclosures)."""
        p = self.p
        if self.kind == "hilbert":
            return 1 - ctx.sqrt(1 - eps ** 2 / 4)
        if self.kind == "clarkson":
            pm = ctx.mpf(p.numerator) / p.denominator
            return 1 - (1 - (eps / 2) ** pm) ** (1 / pm)
        pm = ctx.mpf(p.numerator) / p.denominator
        return (pm - 1) * eps ** 2 / 8

    def enclosure(self, eps, prec: int = 96) -> tuple[Fraction, Fraction]:
        eps = _check_eps(eps)
        if self.kind == "hanner":
            v = (self.p - 1) * eps ** 2 / 8
            return v, v
        return enclose(self.iv, eps, prec=prec)

    def __call__(self, eps) -> float:
        lo, hi = self.enclosure(eps)
        return float((lo + hi) / 2)

    def float_fn(self, e: float) -> float:
        p = float(self.p)
        if self.kind == "hilbert":
            return 1 - (1 - e * e / 4) ** 0.5
        if self.kind == "clarkson":
            return 1 - (1 - (e / 2) ** p) ** (1 / p)
        return (p - 1) * e * e / 8

    def sampled_check(self, samples: int = 10_000, dim: int = 4, seed: int = 0,
                      tol: float = 1e-12) -> float:
        """Worst slack ``||y|| - u - ||(x+y)/2||`` over random pairs in ``l^p(dim)``.

        A negative return value beyond ``-tol`` is a counterexample.
        """
        rng = np.random.default_rng(seed)
        p = float(self.p)
        nrm = lambda v: float(np.sum(np.abs(v) ** p) ** (1 / p))
        worst = float("inf")
        done = 0
        while done < samples:
            x, y = rng.normal(size=dim), rng.normal(size=dim)
            nx, ny = nrm(x), nrm(y)
            if nx > ny:
                x, y, nx, ny = y, x, ny, nx
            s = rng.uniform(0.05, 1.0) / ny
            x, y = x * s, y * s
            e = nrm(x - y)
            e = min(e, 2.0) * rng.uniform(0.5, 1.0)
            worst = min(worst, nrm(y) - self.float_fn(e) - nrm((x + y) / 2))
            done += 1
        if worst < -tol:
            raise AssertionError(f"uniform convexity fails for p={self.p}: slack {worst}")
        return worst


def _check_eps(eps) -> Fraction:
    eps = positive(eps, "eps")
    if eps > 2:
        raise ValueError("eps must lie in (0, 2]")
    return eps


def uc_modulus(p=2) -> UCModulus:
    if isinstance(p, float) and p == float("inf"):
        raise ValueError("p = infinity is not uniformly convex")
    p = as_fraction(p)
    if p <= 1:
        raise ValueError("p must exceed 1")
    if p == 2:
        return UCModulus(p, "hilbert")
    return UCModulus(p, "clarkson" if p > 2 else "hanner")


def eta_quarter(u: UCModulus, eps, bits: int = 48) -> Fraction:
    """A dyadic rational just below ``u(eps)/4``."""
    lo, _ = u.enclosure(eps)
    scale = 2 ** bits
    return Fraction((lo / 4 * scale).__floor__(), scale)


def check_eta(u: UCModulus, eps, eta) -> None:
    """Reject ``eta`` unless it is certifiably below ``u(eps)/2``."""
    eta = positive(eta, "eta")
    lo, _ = u.enclosure(eps)
    if not 2 * eta < lo:
        raise ValueError(f"eta={eta} must satisfy eta < u(eps)/2 (u(eps) >= {float(lo):.6g})")


def fluctuation_bound(u: UCModulus, eps, eta, norm_sq, floor_norm_sq=None) -> int:
    """``floor(2(||x|| - L)/(u(eps) - 2 eta))`` with ``||x||^2 = norm_sq`` and ``L^2 = floor_norm_sq``.

    Inputs are exact rationals; the floor is resolved in interval arithmetic.
    """
    eps = _check_eps(eps)
    eta = as_fraction(eta)
    check_eta(u, eps, eta)
    a = as_fraction(norm_sq)
    b = Fraction(0) if floor_norm_sq is None else as_fraction(floor_norm_sq)
    if a <= b:
        return 0
    if b == 0:
        return exact_floor(lambda c, e, h, s: 2 * c.sqrt(s) / (u.iv(c, e) - 2 * h), eps, eta, a)
    return exact_floor(lambda c, e, h, s, t: 2 * (c.sqrt(s) - c.sqrt(t)) / (u.iv(c, e) - 2 * h),
                       eps, eta, a, b)


def lower_ratio(eta, norm_sq, bits: int = 64) -> Fraction:
    """A dyadic rational just below ``eta / (3 ||x||)``."""
    eta = as_fraction(eta)
    norm_sq = as_fraction(norm_sq)
    if norm_sq == 0:
        raise ValueError("zero vector")
    lo, _ = enclose(lambda c, h, s: h / (3 * c.sqrt(s)), eta, norm_sq, prec=bits + 32)
    scale = 2 ** bits
    return Fraction((lo * scale).__floor__(), scale)
