"""Finite subsets of the lab's groups.

:class:`FiniteSubset` is a plain deduplicated set of elements.  Two
structured subclasses keep large Følner sets symbolic so that cardinalities,
translate overlaps and orbit counts are exact without enumerating elements:

* :class:`LatticeBox`, an axis-parallel box in Z^d;
* :class:`DyadicRows`, a subset of BS(1,2) holding one arithmetic progression
  of dyadic rationals per level, which covers the rectangles ``R_{m,n}`` and
  their inverses.

Structured sets materialize on demand under an element budget.
"""
from __future__ import annotations

import itertools
from collections import Counter
from math import prod

from .errors import BudgetExceeded, DescriptorMismatch
from .groups import (DEFAULT_ELEMENT_BUDGET, BaumslagSolitar12, Dyadic, Group,
                     IntegerLattice)


class FiniteSubset:
    """A finite set of elements of ``group``."""

    def __init__(self, group: Group, elements=(), check: bool = True):
        self.group = group
        elements = frozenset(elements)
        if check:
            group.check(*elements)
        self._elements = elements

    # -- size and membership -------------------------------------------------
    def cardinality(self) -> int:
        return len(self._elements)

    def __len__(self) -> int:
        n = self.cardinality()
        if n > DEFAULT_ELEMENT_BUDGET * 1000:
            # len() must return a machine-size int; exact size via cardinality()
            raise OverflowError("use cardinality() for symbolic sets")
        return n

    def is_empty(self) -> bool:
        return self.cardinality() == 0

    def materialize(self, budget: int = DEFAULT_ELEMENT_BUDGET) -> frozenset:
        return self._elements

    @property
    def elements(self) -> frozenset:
        return self.materialize()

    def __iter__(self):
        return iter(self.materialize())

    def __contains__(self, g) -> bool:
        return g in self._elements

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteSubset):
            return NotImplemented
        return (self.group == other.group and self.cardinality() == other.cardinality()
                and self.materialize() == other.materialize())

    def __hash__(self):
        return hash((self.group, self.materialize()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.group}, |F|={self.cardinality()})"

    # -- translation -------------------------------------------------------
    def left_translate(self, g) -> "FiniteSubset":
        """The set ``gF``."""
        self.group.check(g)
        mul = self.group._mul
        return FiniteSubset(self.group, (mul(g, x) for x in self.materialize()), check=False)

    def right_translate(self, g) -> "FiniteSubset":
        """The set ``Fg``."""
        self.group.check(g)
        mul = self.group._mul
        return FiniteSubset(self.group, (mul(x, g) for x in self.materialize()), check=False)

    def translate_overlap(self, g) -> int:
        """``|F ∩ gF|``."""
        self.group.check(g)
        mul = self.group._mul
        elems = self.materialize()
        return sum(1 for x in elems if mul(g, x) in elems)

    def inverse(self) -> "FiniteSubset":
        inv = self.group._inv
        return FiniteSubset(self.group, (inv(x) for x in self.materialize()), check=False)

    # -- set algebra -----------------------------------------------------
    def _same_group(self, other):
        if not isinstance(other, FiniteSubset):
            raise TypeError("expected a FiniteSubset")
        if other.group != self.group:
            raise DescriptorMismatch(f"{other.group} is not {self.group}")

    def __or__(self, other):
        self._same_group(other)
        return FiniteSubset(self.group, self.materialize() | other.materialize(), check=False)

    def __and__(self, other):
        self._same_group(other)
        return FiniteSubset(self.group, self.materialize() & other.materialize(), check=False)

    def __sub__(self, other):
        self._same_group(other)
        return FiniteSubset(self.group, self.materialize() - other.materialize(), check=False)

    def __xor__(self, other):
        self._same_group(other)
        return FiniteSubset(self.group, self.materialize() ^ other.materialize(), check=False)

    def issubset(self, other) -> bool:
        self._same_group(other)
        return self.materialize() <= other.materialize()

    def product_set(self, other) -> "FiniteSubset":
        """``{x y : x in self, y in other}``."""
        self._same_group(other)
        mul = self.group._mul
        return FiniteSubset(self.group,
                            (mul(x, y) for x in self.materialize() for y in other.materialize()),
                            check=False)


class LatticeBox(FiniteSubset):
    """The box ``prod_i [lo_i, hi_i]`` in ``IntegerLattice(d)``."""

    def __init__(self, group: IntegerLattice, lo, hi):
        if not isinstance(group, IntegerLattice):
            raise DescriptorMismatch("LatticeBox lives in an IntegerLattice")
        lo, hi = tuple(int(v) for v in lo), tuple(int(v) for v in hi)
        if len(lo) != group.d or len(hi) != group.d:
            raise DescriptorMismatch("box corners must have length d")
        self.group = group
        self.lo, self.hi = lo, hi

    @classmethod
    def cube(cls, d: int, radius: int) -> "LatticeBox":
        return cls(IntegerLattice(d), (-radius,) * d, (radius,) * d)

    def sides(self) -> tuple:
        return tuple(max(0, h - l + 1) for l, h in zip(self.lo, self.hi))

    def cardinality(self) -> int:
        return prod(self.sides())

    def __contains__(self, g) -> bool:
        return (self.group.contains(g)
                and all(l <= c <= h for c, l, h in zip(g, self.lo, self.hi)))

    def materialize(self, budget: int = DEFAULT_ELEMENT_BUDGET) -> frozenset:
        n = self.cardinality()
        if n > budget:
            raise BudgetExceeded(f"box with {n} elements exceeds element budget {budget}",
                                 cap=budget, required=n)
        ranges = [range(l, h + 1) for l, h in zip(self.lo, self.hi)]
        return frozenset(itertools.product(*ranges))

    def left_translate(self, g) -> "LatticeBox":
        self.group.check(g)
        return LatticeBox(self.group, [l + c for l, c in zip(self.lo, g)],
                          [h + c for h, c in zip(self.hi, g)])

    right_translate = left_translate

    def inverse(self) -> "LatticeBox":
        return LatticeBox(self.group, [-h for h in self.hi], [-l for l in self.lo])

    def translate_overlap(self, g) -> int:
        self.group.check(g)
        return prod(max(0, s - abs(c)) for s, c in zip(self.sides(), g))

    def overlap_with(self, other: "LatticeBox") -> int:
        return prod(max(0, min(h1, h2) - max(l1, l2) + 1)
                    for l1, h1, l2, h2 in zip(self.lo, self.hi, other.lo, other.hi))

    def residue_counts(self, modulus: int) -> Counter:
        """Multiplicity of each residue vector of the box modulo ``modulus``."""
        axes = []
        for l, h in zip(self.lo, self.hi):
            n = h - l + 1
            base, extra = divmod(n, modulus)
            counts = [base] * modulus
            for t in range(extra):
                counts[(l + t) % modulus] += 1
            axes.append(counts)
        out = Counter()
        for key in itertools.product(range(modulus), repeat=self.group.d):
            c = prod(axes[i][r] for i, r in enumerate(key))
            if c:
                out[key] = c
        return out

    def max_abs_coordinates(self) -> tuple:
        return tuple(max(abs(l), abs(h)) for l, h in zip(self.lo, self.hi))

    def __repr__(self) -> str:
        return f"LatticeBox(lo={self.lo}, hi={self.hi})"


def _ap_intersection(a: Dyadic, s: int, c: int, b: Dyadic, r: int, d: int) -> int:
    """``|{a + i 2^s : 0<=i<c} ∩ {b + j 2^r : 0<=j<d}|`` for dyadic ``a, b``."""
    if c <= 0 or d <= 0:
        return 0
    scale = max(a.exp, b.exp, -s, -r, 0)
    ai = a.num << (scale - a.exp)
    bi = b.num << (scale - b.exp)
    S, R = 1 << (s + scale), 1 << (r + scale)
    if S < R:
        ai, S, c, bi, R, d = bi, R, d, ai, S, c
    if (ai - bi) % R:
        return 0
    lo = max(0, -((ai - bi) // S))           # ceil((bi - ai) / S)
    hi = min(c - 1, (bi + (d - 1) * R - ai) // S)
    return max(0, hi - lo + 1)


class DyadicRows(FiniteSubset):
    """Subset of BS(1,2) given level by level.

    ``rows`` maps a level ``n`` to ``(start, step_exp, count)`` describing the
    elements ``(start + i * 2**step_exp, n)`` for ``0 <= i < count``.
    """

    def __init__(self, rows: dict):
        self.group = BaumslagSolitar12()
        self.rows = {int(n): (start, int(s), int(c)) for n, (start, s, c) in rows.items() if c > 0}

    @classmethod
    def rectangle(cls, m: int, n: int) -> "DyadicRows":
        """``R_{m,n} = {b^-n a^k b^j : |k| <= m, 0 <= j <= 2n}``."""
        start = Dyadic.make(-m, n)
        return cls({j - n: (start, -n, 2 * m + 1) for j in range(2 * n + 1)})

    @classmethod
    def inverse_rectangle(cls, m: int, n: int) -> "DyadicRows":
        """``R_{m,n}^{-1}``: level ``l`` holds ``2^(l-n) * [-m, m]``."""
        return cls({l: (Dyadic.make(-m).shift(l - n), l - n, 2 * m + 1)
                    for l in range(-n, n + 1)})

    def cardinality(self) -> int:
        return sum(c for _, _, c in self.rows.values())

    def __contains__(self, g) -> bool:
        if not self.group.contains(g):
            return False
        row = self.rows.get(g[1])
        if row is None:
            return False
        start, s, c = row
        return _ap_intersection(g[0], 0, 1, start, s, c) == 1

    def materialize(self, budget: int = DEFAULT_ELEMENT_BUDGET) -> frozenset:
        n = self.cardinality()
        if n > budget:
            raise BudgetExceeded(f"BS(1,2) set with {n} elements exceeds element budget {budget}",
                                 cap=budget, required=n)
        out = []
        for level, (start, s, c) in self.rows.items():
            step = Dyadic.make(1).shift(s)
            x = start
            for _ in range(c):
                out.append((x, level))
                x = x + step
        return frozenset(out)

    def left_translate(self, g) -> "DyadicRows":
        self.group.check(g)
        y, t = g
        return DyadicRows({n + t: (y + start.shift(t), s + t, c)
                           for n, (start, s, c) in self.rows.items()})

    def right_translate(self, g) -> "DyadicRows":
        self.group.check(g)
        y, t = g
        return DyadicRows({n + t: (start + y.shift(n), s, c)
                           for n, (start, s, c) in self.rows.items()})

    def overlap_with(self, other: "DyadicRows") -> int:
        total = 0
        for n, (a, s, c) in self.rows.items():
            row = other.rows.get(n)
            if row is not None:
                total += _ap_intersection(a, s, c, *row)
        return total

    def translate_overlap(self, g) -> int:
        return self.overlap_with(self.left_translate(g))

    def affine_counts(self, q: int) -> Counter:
        """Multiplicities of the affine maps ``y -> u*y + v (mod q)`` induced on Z/q.

        Element ``(x, n)`` acts as ``y -> 2^n y + x``; ``q`` must be odd.
        """
        out = Counter()
        for n, (start, s, c) in self.rows.items():
            u = pow(2, n, q)
            v0 = start.mod(q)
            step = pow(2, s, q)
            base, extra = divmod(c, q)
            for r in range(q):
                cnt = base + (1 if r < extra else 0)
                if cnt:
                    out[(u, (v0 + step * r) % q)] += cnt
        return out

    def __repr__(self) -> str:
        return f"DyadicRows(levels={min(self.rows, default=0)}..{max(self.rows, default=0)}, |F|={self.cardinality()})"
