"""Exact group arithmetic for the concrete groups used by the lab.

Each group descriptor is an immutable, hashable dataclass that also carries
the group law.  Elements are plain hashable Python values:

* ``IntegerLattice(d)``: tuple of ``d`` ints
* ``BaumslagSolitar12()``: ``(Dyadic, int)`` for the element ``(x, n)`` of
  Z[1/2] x| Z with ``(x, n)(y, m) = (x + 2**n * y, n + m)``
* ``FreeGroup(rank)``: reduced word, a tuple of ``(generator, sign)`` letters
* ``Cyclic(q)``: int residue in ``[0, q)``
* ``Product(left, right)``: pair of elements
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable

from .errors import BudgetExceeded, DescriptorMismatch

DEFAULT_ELEMENT_BUDGET = 10**6


@dataclass(frozen=True, slots=True, order=False)
class Dyadic:
    """The dyadic rational ``num / 2**exp`` in lowest terms.

    Canonical form: ``num`` odd, or ``num == 0`` with ``exp == 0``.  Use
    :meth:`make` to build from arbitrary ``(num, exp)``.
    """

    num: int
    exp: int

    @classmethod
    def make(cls, num: int, exp: int = 0) -> "Dyadic":
        if num == 0:
            return cls(0, 0)
        tz = (num & -num).bit_length() - 1
        return cls(num >> tz, exp - tz)

    @classmethod
    def from_fraction(cls, value) -> "Dyadic":
        value = Fraction(value)
        den = value.denominator
        if den & (den - 1):
            raise ValueError(f"{value} is not a dyadic rational")
        return cls.make(value.numerator, den.bit_length() - 1)

    def __add__(self, other: "Dyadic") -> "Dyadic":
        e = max(self.exp, other.exp)
        return Dyadic.make((self.num << (e - self.exp)) + (other.num << (e - other.exp)), e)

    def __neg__(self) -> "Dyadic":
        return Dyadic(-self.num, self.exp)

    def __sub__(self, other: "Dyadic") -> "Dyadic":
        return self + (-other)

    def shift(self, t: int) -> "Dyadic":
        """Multiply by ``2**t``."""
        if self.num == 0:
            return self
        return Dyadic(self.num, self.exp - t)

    def to_fraction(self) -> Fraction:
        if self.exp >= 0:
            return Fraction(self.num, 1 << self.exp)
        return Fraction(self.num << -self.exp)

    def mod(self, q: int) -> int:
        """Image in Z/q for odd ``q`` (2 is inverted modulo q)."""
        return self.num * pow(2, -self.exp, q) % q

    def __lt__(self, other: "Dyadic") -> bool:
        return self.to_fraction() < other.to_fraction()

    def __repr__(self) -> str:
        return f"Dyadic({self.to_fraction()})"


ZERO = Dyadic(0, 0)
ONE = Dyadic(1, 0)


class Group:
    """Common interface; concrete descriptors override the group law."""

    def identity(self):
        raise NotImplementedError

    def contains(self, g) -> bool:
        raise NotImplementedError

    def _mul(self, g, h):
        raise NotImplementedError

    def _inv(self, g):
        raise NotImplementedError

    def generators(self) -> list:
        """Standard generating set (not symmetrized)."""
        raise NotImplementedError

    def is_finite(self) -> bool:
        return False

    def check(self, *elements) -> None:
        for g in elements:
            if not self.contains(g):
                raise DescriptorMismatch(f"{g!r} is not an element of {self}")

    def multiply(self, g, h):
        self.check(g, h)
        return self._mul(g, h)

    def inverse(self, g):
        self.check(g)
        return self._inv(g)

    def product(self, *elements):
        out = self.identity()
        for g in elements:
            out = self.multiply(out, g)
        return out

    def power(self, g, k: int):
        self.check(g)
        if k < 0:
            g, k = self._inv(g), -k
        out, base = self.identity(), g
        while k:
            if k & 1:
                out = self._mul(out, base)
            base = self._mul(base, base)
            k >>= 1
        return out

    def symmetrize(self, gens: Iterable) -> list:
        out = []
        seen = set()
        for s in gens:
            self.check(s)
            for t in (s, self._inv(s)):
                if t not in seen:
                    seen.add(t)
                    out.append(t)
        return out

    # JSON round-tripping; see folnerlab.serialize for the document shape.
    def descriptor_json(self) -> dict:
        raise NotImplementedError

    def element_to_json(self, g) -> Any:
        raise NotImplementedError

    def element_from_json(self, data) -> Any:
        raise NotImplementedError


@dataclass(frozen=True)
class IntegerLattice(Group):
    d: int

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise ValueError("IntegerLattice needs d >= 1")

    def identity(self):
        return (0,) * self.d

    def contains(self, g) -> bool:
        return (type(g) is tuple and len(g) == self.d
                and all(type(c) is int for c in g))

    def _mul(self, g, h):
        return tuple(a + b for a, b in zip(g, h))

    def _inv(self, g):
        return tuple(-a for a in g)

    def generators(self):
        return [tuple(1 if i == j else 0 for i in range(self.d)) for j in range(self.d)]

    def descriptor_json(self):
        return {"tag": "IntegerLattice", "d": self.d}

    def element_to_json(self, g):
        return list(g)

    def element_from_json(self, data):
        return tuple(int(c) for c in data)


@dataclass(frozen=True)
class BaumslagSolitar12(Group):
    """BS(1,2) = <a, b | b a b^-1 = a^2> realised as Z[1/2] x| Z.

    ``a = (1, 0)`` and ``b = (0, 1)``.
    """

    def identity(self):
        return (ZERO, 0)

    def contains(self, g) -> bool:
        return (type(g) is tuple and len(g) == 2 and type(g[0]) is Dyadic
                and type(g[1]) is int)

    def _mul(self, g, h):
        return (g[0] + h[0].shift(g[1]), g[1] + h[1])

    def _inv(self, g):
        return ((-g[0]).shift(-g[1]), -g[1])

    def generators(self):
        return [self.a, self.b]

    @property
    def a(self):
        return (ONE, 0)

    @property
    def b(self):
        return (ZERO, 1)

    def element(self, x, n: int):
        """Build ``(x, n)`` from any dyadic-valued number."""
        if not isinstance(x, Dyadic):
            x = Dyadic.from_fraction(x)
        return (x, int(n))

    def descriptor_json(self):
        return {"tag": "BaumslagSolitar12"}

    def element_to_json(self, g):
        return {"x": {"num": g[0].num, "exp": g[0].exp}, "n": g[1]}

    def element_from_json(self, data):
        return (Dyadic.make(int(data["x"]["num"]), int(data["x"]["exp"])), int(data["n"]))


def free_reduce(word: Iterable[tuple[int, int]]) -> tuple:
    out: list = []
    for letter in word:
        if out and out[-1][0] == letter[0] and out[-1][1] == -letter[1]:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


@dataclass(frozen=True)
class FreeGroup(Group):
    rank: int

    def __post_init__(self):
        if not isinstance(self.rank, int) or self.rank < 1:
            raise ValueError("FreeGroup needs rank >= 1")

    def identity(self):
        return ()

    def contains(self, g) -> bool:
        if type(g) is not tuple:
            return False
        prev = None
        for letter in g:
            if (type(letter) is not tuple or len(letter) != 2
                    or not 0 <= letter[0] < self.rank or letter[1] not in (1, -1)):
                return False
            if prev is not None and prev[0] == letter[0] and prev[1] == -letter[1]:
                return False
            prev = letter
        return True

    def _mul(self, g, h):
        i = 0
        n = min(len(g), len(h))
        while i < n and g[-1 - i][0] == h[i][0] and g[-1 - i][1] == -h[i][1]:
            i += 1
        return g[:len(g) - i] + h[i:]

    def _inv(self, g):
        return tuple((s, -e) for s, e in reversed(g))

    def generators(self):
        return [((i, 1),) for i in range(self.rank)]

    def word(self, *letters) -> tuple:
        """Reduced word from letters ``(generator, sign)``."""
        return free_reduce(letters)

    def descriptor_json(self):
        return {"tag": "FreeGroup", "rank": self.rank}

    def element_to_json(self, g):
        return [list(letter) for letter in g]

    def element_from_json(self, data):
        return free_reduce((int(s), int(e)) for s, e in data)


@dataclass(frozen=True)
class Cyclic(Group):
    q: int

    def __post_init__(self):
        if not isinstance(self.q, int) or self.q < 1:
            raise ValueError("Cyclic needs q >= 1")

    def identity(self):
        return 0

    def contains(self, g) -> bool:
        return type(g) is int and 0 <= g < self.q

    def _mul(self, g, h):
        return (g + h) % self.q

    def _inv(self, g):
        return -g % self.q

    def generators(self):
        return [1 % self.q]

    def is_finite(self) -> bool:
        return True

    def elements(self) -> list:
        return list(range(self.q))

    def descriptor_json(self):
        return {"tag": "Cyclic", "q": self.q}

    def element_to_json(self, g):
        return g

    def element_from_json(self, data):
        return int(data) % self.q


@dataclass(frozen=True)
class Product(Group):
    left: Group
    right: Group

    def identity(self):
        return (self.left.identity(), self.right.identity())

    def contains(self, g) -> bool:
        return (type(g) is tuple and len(g) == 2
                and self.left.contains(g[0]) and self.right.contains(g[1]))

    def _mul(self, g, h):
        return (self.left._mul(g[0], h[0]), self.right._mul(g[1], h[1]))

    def _inv(self, g):
        return (self.left._inv(g[0]), self.right._inv(g[1]))

    def generators(self):
        e1, e2 = self.left.identity(), self.right.identity()
        return ([(s, e2) for s in self.left.generators()]
                + [(e1, s) for s in self.right.generators()])

    def is_finite(self) -> bool:
        return self.left.is_finite() and self.right.is_finite()

    def elements(self) -> list:
        return [(a, b) for a in self.left.elements() for b in self.right.elements()]

    def descriptor_json(self):
        return {"tag": "Product", "left": self.left.descriptor_json(),
                "right": self.right.descriptor_json()}

    def element_to_json(self, g):
        return [self.left.element_to_json(g[0]), self.right.element_to_json(g[1])]

    def element_from_json(self, data):
        return (self.left.element_from_json(data[0]), self.right.element_from_json(data[1]))


def group_from_json(data: dict) -> Group:
    tag = data["tag"]
    if tag == "IntegerLattice":
        return IntegerLattice(int(data["d"]))
    if tag == "BaumslagSolitar12":
        return BaumslagSolitar12()
    if tag == "FreeGroup":
        return FreeGroup(int(data["rank"]))
    if tag == "Cyclic":
        return Cyclic(int(data["q"]))
    if tag == "Product":
        return Product(group_from_json(data["left"]), group_from_json(data["right"]))
    raise ValueError(f"unknown group tag {tag!r}")


def ball(group: Group, gens=None, radius: int = 0, budget: int = DEFAULT_ELEMENT_BUDGET):
    """Closed word-metric ball around the identity, by breadth-first search.

    ``gens`` defaults to the standard generators and is symmetrized.
    Raises :class:`BudgetExceeded` if the ball would hold more than
    ``budget`` elements.
    """
    from .subsets import FiniteSubset

    layers = _ball_layers(group, gens, radius, budget)
    return FiniteSubset(group, frozenset().union(*layers))


def growth_sequence(group: Group, gens=None, max_radius: int = 0,
                    budget: int = DEFAULT_ELEMENT_BUDGET) -> list[int]:
    layers = _ball_layers(group, gens, max_radius, budget)
    sizes, total = [], 0
    for layer in layers:
        total += len(layer)
        sizes.append(total)
    return sizes


def _ball_layers(group, gens, radius, budget):
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    gens = group.symmetrize(group.generators() if gens is None else gens)
    e = group.identity()
    seen = {e}
    frontier = [e]
    layers = [frozenset(frontier)]
    for _ in range(radius):
        nxt = []
        for g in frontier:
            for s in gens:
                h = group._mul(g, s)
                if h not in seen:
                    seen.add(h)
                    nxt.append(h)
                    if len(seen) > budget:
                        raise BudgetExceeded(
                            f"ball exceeds element budget {budget}", cap=budget)
        frontier = nxt
        layers.append(frozenset(nxt))
    return layers
