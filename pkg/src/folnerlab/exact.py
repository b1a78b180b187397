"""Rational helpers and rigorous enclosures of irrational quantities."""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import mpmath
from mpmath.libmp import to_rational


def as_fraction(x) -> Fraction:
    """Exact rational from int, Fraction, decimal string or float (via its repr)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot read {x!r} as a rational")


def positive(x, name="value") -> Fraction:
    x = as_fraction(x)
    if x <= 0:
        raise ValueError(f"{name} must be positive, got {x}")
    return x


def ceil_div(a: Fraction) -> int:
    a = as_fraction(a)
    return -((-a.numerator) // a.denominator)


def interval_bounds(iv) -> tuple[Fraction, Fraction]:
    """Outward rational endpoints of an ``mpmath.iv`` interval, without rounding."""
    lo, hi = iv._mpi_
    return Fraction(*to_rational(lo)), Fraction(*to_rational(hi))


def enclose(fn, *args, prec: int = 80) -> tuple[Fraction, Fraction]:
    """Evaluate ``fn`` on mpmath intervals and return a rational enclosure."""
    ctx = mpmath.iv
    old = ctx.prec
    ctx.prec = prec
    try:
        out = fn(ctx, *[_rational_interval(a) for a in args])
    finally:
        ctx.prec = old
    return interval_bounds(out)


def _rational_interval(a):
    # outward-rounded quotient of two exact integers
    a = as_fraction(a)
    return mpmath.iv.mpf(a.numerator) / mpmath.iv.mpf(a.denominator)


def exact_floor(fn, *args, start_prec: int = 64, max_prec: int = 4096) -> int:
    """``floor(fn(*args))`` for a real expression evaluated in interval arithmetic.

    Precision doubles until both enclosure endpoints share a floor.  A value
    that is exactly an integer cannot be separated this way and raises.
    """
    prec = start_prec
    while prec <= max_prec:
        lo, hi = enclose(fn, *args, prec=prec)
        flo, fhi = lo.numerator // lo.denominator, hi.numerator // hi.denominator
        if flo == fhi:
            return flo
        prec *= 2
    raise ArithmeticError("floor undecided: value is an integer or too close to one")
