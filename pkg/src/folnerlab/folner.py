"""Følner defects, schedules, convergence moduli and fast refinement.

Defects use left translates: ``|F Δ gF| / |F|``.  With the averaging
convention ``(A_n f)(x) = mean_{g in F_n} f(g.x)`` this is the side on which
``A_K A_N`` is compared with ``A_K``.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional

from .errors import BudgetExceeded, DescriptorMismatch, FolnerLabError, SearchExhausted
from .exact import as_fraction, ceil_div, positive
from .groups import (DEFAULT_ELEMENT_BUDGET, BaumslagSolitar12, Cyclic, Group,
                     IntegerLattice, Product, _ball_layers, group_from_json)
from .subsets import DyadicRows, FiniteSubset, LatticeBox


class NoClosedForm(FolnerLabError):
    """The schedule kind has no closed-form modulus; use :func:`empirical_modulus`."""


# ---------------------------------------------------------------------------
# defects


def _elements_of(K, budget=DEFAULT_ELEMENT_BUDGET):
    if isinstance(K, FiniteSubset):
        return K.materialize(budget)
    return list(K)


def symdiff_ratio(F: FiniteSubset, g) -> Fraction:
    """``|F Δ gF| / |F|`` as an exact rational."""
    n = F.cardinality()
    if n == 0:
        raise ValueError("symdiff_ratio needs a nonempty set")
    return Fraction(2 * (n - F.translate_overlap(g)), n)


def max_defect(F: FiniteSubset, K) -> tuple[Fraction, object]:
    """Largest ``symdiff_ratio(F, g)`` over ``g in K``, with a maximizing ``g``.

    For two lattice boxes the maximum sits at a corner of ``K`` of largest
    absolute coordinates, since the overlap shrinks in each ``|g_i|``.
    """
    if isinstance(F, LatticeBox) and isinstance(K, LatticeBox):
        if F.group != K.group:
            raise DescriptorMismatch("sets live in different groups")
        if K.cardinality() == 0:
            raise ValueError("K must be nonempty")
        g = K.max_abs_coordinates()
        g = tuple(c if c in (l, h) else -c for c, l, h in zip(g, K.lo, K.hi))
        return symdiff_ratio(F, g), g
    best, arg = None, None
    for g in _elements_of(K):
        r = symdiff_ratio(F, g)
        if best is None or r > best:
            best, arg = r, g
    if best is None:
        raise ValueError("K must be nonempty")
    return best, arg


def folner_defect(F: FiniteSubset, K) -> Fraction:
    return max_defect(F, K)[0]


def k_boundary(F: FiniteSubset, K) -> FiniteSubset:
    """``{g : Kg meets both F and its complement}``."""
    G = F.group
    ks = list(_elements_of(K))
    if not ks:
        raise ValueError("K must be nonempty")
    G.check(*ks)
    mul, inv = G._mul, G._inv
    fe = F.materialize()
    # Kg ∩ F ≠ ∅ forces g ∈ K⁻¹F
    candidates = {mul(inv(k), x) for k in ks for x in fe}
    out = []
    for g in candidates:
        hits = [mul(k, g) in F for k in ks]
        if any(hits) and not all(hits):
            out.append(g)
    return FiniteSubset(G, out, check=False)


# ---------------------------------------------------------------------------
# distance functions and moduli


class DistanceFunction:
    """A map ``(n, eps) -> index`` used as a Følner modulus or fluctuation distance."""

    def __init__(self, fn: Callable, name: str = "beta", strictly_increasing: bool = False):
        self.fn = fn
        self.name = name
        self.strictly_increasing = strictly_increasing

    def __call__(self, n: int, eps=Fraction(1)) -> int:
        return int(self.fn(int(n), as_fraction(eps)))

    def is_strictly_increasing(self, eps, ns: Iterable[int]) -> bool:
        vals = [self(n, eps) for n in sorted(set(ns))]
        return all(a < b for a, b in zip(vals, vals[1:]))

    def __repr__(self):
        return f"DistanceFunction({self.name})"


def successor() -> DistanceFunction:
    return DistanceFunction(lambda n, e: n + 1, "n+1", strictly_increasing=True)


def monotone_envelope(beta: DistanceFunction) -> DistanceFunction:
    """``n -> max_{i<=n} beta(i, eps)``, raised minimally to be strictly increasing."""
    cache: dict = {}
    lock = threading.Lock()

    def env(n, eps):
        with lock:
            vals = cache.setdefault(eps, [])
            while len(vals) < n:
                i = len(vals) + 1
                b = beta(i, eps)
                vals.append(b if not vals else max(b, vals[-1] + 1))
            return vals[n - 1]

    return DistanceFunction(env, f"envelope({beta.name})", strictly_increasing=True)


def _box_stated(d):
    def beta(n, eps):
        return ceil_div(Fraction(n) / (2 ** (d - 1) * eps))
    return beta


def _box_corrected(d):
    # 2(1-(1-n/(2m+1))^d) <= 2dn/(2m+1) < eps once m >= dn/eps
    def beta(n, eps):
        return ceil_div(Fraction(d * n) / eps)
    return beta


def _interval(n, eps):
    # F_n = [0, n-1]; worst g = n-1 shifts F_m = [0, m-1] by 2(n-1)/m
    return (2 * (n - 1)) // eps + 1 if n > 1 else 1


def _bs12_stated(j, eps):
    return ceil_div((Fraction(4) ** j + j) / eps)


def _bs12_corrected(j, eps):
    # least k with (4j+2)/(2k+1) < eps, see bs12_defect_bound
    x = Fraction(4 * j + 2) / eps
    return max(1, int((x - 1) // 2) + 1)


def _greedy(n, eps):
    # beta(n, 1/k) = max(n+1, k); a general eps is rounded down to 1/k
    return max(n + 1, ceil_div(1 / eps))


CLOSED_FORMS = {
    "box-stated": "closed form as commonly stated for boxes [-n,n]^d",
    "box": "sound closed form for boxes [-n,n]^d",
    "interval": "intervals [0, n-1] in Z",
    "bs12-stated": "closed form as commonly stated for BS(1,2) rectangles",
    "bs12": "sound closed form for BS(1,2) rectangles from the overlap bound",
    "greedy": "greedy computable construction",
}


def closed_form_modulus(kind: str, d: int = 2) -> DistanceFunction:
    """Closed-form Følner modulus for a schedule kind, wrapped in the envelope."""
    if kind == "box-stated":
        raw = DistanceFunction(_box_stated(d), f"ceil(n/(2^{d - 1} eps))")
    elif kind == "box":
        raw = DistanceFunction(_box_corrected(d), f"ceil({d}n/eps)")
    elif kind == "interval":
        raw = DistanceFunction(_interval, "floor(2(n-1)/eps)+1")
    elif kind == "bs12-stated":
        raw = DistanceFunction(_bs12_stated, "ceil((4^j+j)/eps)")
    elif kind == "bs12":
        raw = DistanceFunction(_bs12_corrected, "least k: (4j+2)/(2k+1) < eps")
    elif kind == "greedy":
        raw = DistanceFunction(_greedy, "max(n+1, ceil(1/eps))")
    else:
        raise NoClosedForm(f"no closed-form modulus for schedule kind {kind!r}")
    return monotone_envelope(raw)


def bs12_defect_bound(k: int, j: int) -> Fraction:
    """Upper bound on ``folner_defect(F_k, F_j)`` for the BS(1,2) schedule.

    ``F_k = R_{4^k,k}^{-1}``.  Its left defect under ``h`` equals the right
    defect of ``R_{4^k,k}`` under ``h^{-1}``.  Right-translating by an element
    of ``R_{4^j,j}`` keeps at least ``W - 2^(l+k+j)`` points of each level
    ``l`` with ``|l| <= k-j`` (``W = 2*4^k + 1``), which gives this bound.
    """
    if j > k:
        return Fraction(2)
    W = 2 * 4 ** k + 1
    lost = 2 * j * W + 2 ** (2 * k + 1) - 2 ** (2 * j)
    return min(Fraction(2), Fraction(2 * lost, (2 * k + 1) * W))


def bs12_defect_bound_simple(k: int, j: int) -> Fraction:
    """``(4j+2)/(2k+1)``, which dominates :func:`bs12_defect_bound`."""
    return min(Fraction(2), Fraction(4 * j + 2, 2 * k + 1))


# ---------------------------------------------------------------------------
# schedules


class FolnerSchedule:
    """An indexed family ``n -> F_n`` (``n >= 1``) with optional modulus data.

    ``defect_bound(m, n)``, when given, is a certified upper bound on
    ``folner_defect(F_m, F_n)``; it lets searches run past the element budget.
    ``monotone`` declares that ``symdiff_ratio(F_m, g)`` is nonincreasing in
    ``m`` for each ``g``, which licenses galloping searches.
    """

    BS12_CHEAP_LEVEL = 3000

    def __init__(self, group: Group, set_at: Callable[[int], FiniteSubset], name: str,
                 kind: Optional[str] = None, modulus: Optional[DistanceFunction] = None,
                 stated_modulus: Optional[DistanceFunction] = None,
                 defect_bound: Optional[Callable[[int, int], Fraction]] = None,
                 monotone: bool = False, nested: bool = False, indices=None,
                 cheap: Optional[Callable[[int], bool]] = None,
                 bs12_param: Optional[Callable[[int], int]] = None):
        self.group = group
        self._set_at = set_at
        self.name = name
        self.kind = kind
        self.modulus = modulus
        self.stated_modulus = stated_modulus
        self.defect_bound = defect_bound
        self.monotone = monotone
        self.nested = nested
        self.indices = indices
        # whether set_at(n) is affordable to build; symbolic sets are always cheap
        self.cheap = cheap or (lambda n: True)
        # for BS(1,2) inverse rectangles: n -> k with F_n = R_{4^k,k}^{-1}
        self.bs12_param = bs12_param
        self._cache: dict = {}
        self._lock = threading.Lock()

    def set_at(self, n: int) -> FiniteSubset:
        n = int(n)
        if n < 1:
            raise ValueError("schedule indices start at 1")
        with self._lock:
            F = self._cache.get(n)
        if F is None:
            F = self._set_at(n)
            if F.group != self.group:
                raise DescriptorMismatch(f"set at {n} lives in {F.group}")
            if F.cardinality() == 0:
                raise FolnerLabError(f"schedule {self.name} produced an empty set at {n}")
            with self._lock:
                F = self._cache.setdefault(n, F)
        return F

    __getitem__ = set_at

    def prefix(self, count: int) -> list:
        return [self.set_at(n) for n in range(1, count + 1)]

    def closed_form(self, n: int, eps) -> int:
        if self.modulus is None:
            raise NoClosedForm(f"schedule {self.name} has no closed-form modulus")
        return self.modulus(n, eps)

    def __repr__(self):
        return f"FolnerSchedule({self.name})"


def interval_schedule(m_seq=None, n_seq=None) -> FolnerSchedule:
    """``F_n = [m_n, n_n]`` in Z; defaults to ``[0, n-1]``."""
    G = IntegerLattice(1)
    default = m_seq is None and n_seq is None
    m_seq = m_seq or (lambda n: 0)
    n_seq = n_seq or (lambda n: n - 1)

    def at(n):
        lo, hi = m_seq(n), n_seq(n)
        if lo > hi:
            raise ValueError(f"interval bounds out of order at {n}: {lo} > {hi}")
        return LatticeBox(G, (lo,), (hi,))

    return FolnerSchedule(G, at, "intervals" if default else "custom intervals",
                          kind="interval" if default else None,
                          modulus=closed_form_modulus("interval") if default else None,
                          monotone=default, nested=default)


def box_schedule(d: int) -> FolnerSchedule:
    """``F_n = [-n, n]^d``."""
    G = IntegerLattice(d)
    return FolnerSchedule(G, lambda n: LatticeBox.cube(d, n), f"boxes Z^{d}", kind="box",
                          modulus=closed_form_modulus("box", d),
                          stated_modulus=closed_form_modulus("box-stated", d),
                          monotone=True, nested=True)


def bs12_schedule(side: str = "inverse") -> FolnerSchedule:
    """Rectangles ``R_{4^n, n}`` in BS(1,2).

    ``side="inverse"`` (default) uses ``R^{-1}``, which is Følner for left
    translates.  ``side="rectangle"`` gives ``R`` itself, which is Følner only
    for right translates and carries no modulus.
    """
    if side == "inverse":
        return FolnerSchedule(BaumslagSolitar12(),
                              lambda n: DyadicRows.inverse_rectangle(4 ** n, n),
                              "BS(1,2) inverse rectangles", kind="bs12",
                              modulus=closed_form_modulus("bs12"),
                              stated_modulus=closed_form_modulus("bs12-stated"),
                              defect_bound=bs12_defect_bound_simple,
                              cheap=lambda n: n <= FolnerSchedule.BS12_CHEAP_LEVEL,
                              bs12_param=lambda n: n)
    if side == "rectangle":
        return FolnerSchedule(BaumslagSolitar12(), lambda n: DyadicRows.rectangle(4 ** n, n),
                              "BS(1,2) rectangles",
                              cheap=lambda n: n <= FolnerSchedule.BS12_CHEAP_LEVEL)
    raise ValueError("side must be 'inverse' or 'rectangle'")


def constant_schedule(F: FiniteSubset, name="constant") -> FolnerSchedule:
    return FolnerSchedule(F.group, lambda n: F, name)


def whole_group_schedule(group: Group) -> FolnerSchedule:
    """``F_n = G`` for a finite group; every defect is 0 and any modulus works."""
    if not group.is_finite():
        raise ValueError("whole_group_schedule needs a finite group")
    F = FiniteSubset(group, group.elements())
    return FolnerSchedule(group, lambda n: F, f"whole {group}", kind="whole",
                          modulus=DistanceFunction(lambda n, e: n, "n", True),
                          defect_bound=lambda m, n: Fraction(0), monotone=True, nested=True)


class ProductSet(FiniteSubset):
    """``F1 x F2`` kept as a pair so overlaps factor."""

    def __init__(self, left: FiniteSubset, right: FiniteSubset):
        self.group = Product(left.group, right.group)
        self.left, self.right = left, right

    def cardinality(self):
        return self.left.cardinality() * self.right.cardinality()

    def __contains__(self, g):
        return self.group.contains(g) and g[0] in self.left and g[1] in self.right

    def materialize(self, budget=DEFAULT_ELEMENT_BUDGET):
        n = self.cardinality()
        if n > budget:
            raise BudgetExceeded(f"product set with {n} elements exceeds budget {budget}",
                                 cap=budget, required=n)
        return frozenset(itertools.product(self.left.materialize(budget),
                                           self.right.materialize(budget)))

    def translate_overlap(self, g):
        self.group.check(g)
        return self.left.translate_overlap(g[0]) * self.right.translate_overlap(g[1])

    def left_translate(self, g):
        return ProductSet(self.left.left_translate(g[0]), self.right.left_translate(g[1]))


def product_schedule(s1: FolnerSchedule, s2: FolnerSchedule) -> FolnerSchedule:
    """``F_n = F1_n x F2_n``.

    Defects add: ``1-(1-a)(1-b) <= a+b`` for the half-defects, so
    ``max(beta1(n, eps/2), beta2(n, eps/2))`` is a modulus when both exist.
    """
    modulus = None
    if s1.modulus is not None and s2.modulus is not None:
        b1, b2 = s1.modulus, s2.modulus
        modulus = monotone_envelope(DistanceFunction(
            lambda n, e: max(b1(n, e / 2), b2(n, e / 2)), f"max({b1.name},{b2.name})"))
    bound = None
    if s1.defect_bound is not None and s2.defect_bound is not None:
        f1, f2 = s1.defect_bound, s2.defect_bound
        bound = lambda m, n: min(Fraction(2), f1(m, n) + f2(m, n))
    return FolnerSchedule(Product(s1.group, s2.group),
                          lambda n: ProductSet(s1.set_at(n), s2.set_at(n)),
                          f"{s1.name} x {s2.name}", kind="product", modulus=modulus,
                          defect_bound=bound, monotone=s1.monotone and s2.monotone,
                          nested=s1.nested and s2.nested)


def subsequence(schedule: FolnerSchedule, indices: list, name=None) -> FolnerSchedule:
    """The schedule ``n -> F_{indices[n-1]}`` (finite prefix)."""
    idx = list(indices)

    def at(n):
        if n > len(idx):
            raise SearchExhausted(f"subsequence has only {len(idx)} sets", last_index=len(idx))
        return schedule.set_at(idx[n - 1])

    bound = None
    if schedule.defect_bound is not None:
        bound = lambda m, n: schedule.defect_bound(idx[m - 1], idx[n - 1])
    def cheap(n):
        return n <= len(idx) and schedule.cheap(idx[n - 1])

    param = None
    if schedule.bs12_param is not None:
        param = lambda n: schedule.bs12_param(idx[n - 1])
    return FolnerSchedule(schedule.group, at, name or f"{schedule.name}[{idx}]",
                          defect_bound=bound, nested=schedule.nested, indices=idx,
                          cheap=cheap, bs12_param=param)


# ---------------------------------------------------------------------------
# moduli by search


@dataclass
class ModulusCheck:
    passed: bool
    n: int
    eps: Fraction
    start: int
    horizon: int
    witness: Optional[tuple] = None  # (m, g, defect)

    def __bool__(self):
        return self.passed


@dataclass
class EmpiricalModulus:
    """Least ``N`` that works for every ``m`` in ``[N, horizon]``.

    Certified only up to ``horizon``; the tail needs a closed form.
    """
    N: int
    horizon: int
    certified_to: int = field(init=False)

    def __post_init__(self):
        self.certified_to = self.horizon


def _defect_at(schedule, m, n, budget):
    """Exact ``(defect, g)`` of ``F_m`` against ``F_n``."""
    if not (schedule.cheap(m) and schedule.cheap(n)):
        raise BudgetExceeded(f"sets at {m} or {n} are too large to build", cap=budget)
    Fm, Fn = schedule.set_at(m), schedule.set_at(n)
    if not (isinstance(Fm, LatticeBox) and isinstance(Fn, LatticeBox)) and Fn.cardinality() > budget:
        raise BudgetExceeded(f"F_{n} has {Fn.cardinality()} elements", cap=budget,
                             required=Fn.cardinality())
    return max_defect(Fm, Fn)


def empirical_modulus(schedule: FolnerSchedule, n: int, eps, horizon: int,
                      budget: int = DEFAULT_ELEMENT_BUDGET) -> EmpiricalModulus:
    eps = positive(eps, "eps")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    N = 1
    for m in range(horizon, 0, -1):
        if _defect_at(schedule, m, n, budget)[0] >= eps:
            N = m + 1
            break
    if N > horizon:
        raise SearchExhausted(f"no modulus within horizon {horizon}", last_index=horizon)
    return EmpiricalModulus(N, horizon)


def verify_modulus(schedule: FolnerSchedule, beta, n: int, eps, horizon: int,
                   budget: int = DEFAULT_ELEMENT_BUDGET) -> ModulusCheck:
    """Exhaustively check ``beta(n, eps)`` on ``[beta(n, eps), horizon]``."""
    eps = positive(eps, "eps")
    start = beta(n, eps) if callable(beta) else int(beta)
    for m in range(max(start, 1), horizon + 1):
        d, g = _defect_at(schedule, m, n, budget)
        if d >= eps:
            return ModulusCheck(False, n, eps, start, horizon, (m, g, d))
    return ModulusCheck(True, n, eps, start, horizon)


# ---------------------------------------------------------------------------
# fast refinement


@dataclass
class FastCheck:
    passed: bool
    lam: int
    eps: Fraction
    witness: Optional[tuple] = None  # (k, m, g or None, defect or bound)
    certified_by: str = "exact"

    def __bool__(self):
        return self.passed


def _union_defect(schedule, m, chosen, budget):
    """Defect of ``F_m`` against the union of the sets at ``chosen``."""
    Fm = schedule.set_at(m)
    if schedule.nested and isinstance(Fm, LatticeBox):
        return max_defect(Fm, schedule.set_at(max(chosen)))
    best, arg = Fraction(0), None
    for n in chosen:
        d, g = _defect_at(schedule, m, n, budget)
        if d > best:
            best, arg = d, g
    return best, arg


def _exact_feasible(schedule, chosen, budget):
    if not all(schedule.cheap(n) for n in chosen):
        return False
    if schedule.nested and isinstance(schedule.set_at(chosen[-1]), LatticeBox):
        return True
    try:
        return sum(schedule.set_at(n).cardinality() for n in chosen) <= budget
    except BudgetExceeded:
        return False


def _least_index(ok: Callable[[int], bool], lo: int, horizon: int, monotone: bool) -> int:
    """Least ``m`` in ``[lo, horizon]`` with ``ok(m)``.

    With ``monotone`` the predicate is assumed upward closed and found by
    galloping plus bisection; otherwise a linear scan is used.
    """
    if not monotone:
        for m in range(lo, horizon + 1):
            if ok(m):
                return m
        raise SearchExhausted("refinement stalled", last_index=horizon)
    step, prev, m = 1, lo - 1, lo
    while not ok(m):
        if m >= horizon:
            raise SearchExhausted("refinement stalled", last_index=horizon)
        prev, m = m, min(horizon, m + step)
        step *= 2
    lo_, hi_ = prev + 1, m
    while lo_ < hi_:
        mid = (lo_ + hi_) // 2
        if ok(mid):
            hi_ = mid
        else:
            lo_ = mid + 1
    return lo_


def fast_refine(schedule: FolnerSchedule, lam: int, eps, count: int,
                horizon: int = 10 ** 18, budget: int = 20_000, start: int = 1,
                method: str = "auto") -> FolnerSchedule:
    """Greedy (1, eps)-fast subsequence of ``schedule``.

    Each new index is the least one whose set has defect < eps against every
    element of the sets chosen so far.  ``method="bound"`` replaces the exact
    defect by ``schedule.defect_bound``: sound, but the indices may come later
    than the exact greedy ones.  ``"auto"`` uses exact defects for monotone
    schedules or ones without a bound, and the bound otherwise.  The result is
    (lam, eps)-fast for every lam >= 1.
    """
    eps = positive(eps, "eps")
    if lam < 1 or count < 1:
        raise ValueError("lam and count must be at least 1")
    chosen = [start]
    certified = []
    while len(chosen) < count:
        use_exact = method == "exact" or (
            method == "auto" and (schedule.monotone or schedule.defect_bound is None)
            and _exact_feasible(schedule, chosen, budget))
        lo = chosen[-1] + 1
        try:
            if use_exact:
                m = _least_index(lambda m: _union_defect(schedule, m, chosen, budget)[0] < eps,
                                 lo, horizon, schedule.monotone)
                certified.append("exact")
            else:
                if schedule.defect_bound is None:
                    raise FolnerLabError("no defect bound available for this schedule")
                bound = schedule.defect_bound
                # the bounds used here are nonincreasing in m
                m = _least_index(lambda m: max(bound(m, n) for n in chosen) < eps,
                                 lo, horizon, True)
                certified.append("bound")
        except SearchExhausted as exc:
            raise SearchExhausted(f"refinement stalled at index {len(chosen)}",
                                  last_index=len(chosen)) from exc
        chosen.append(m)
    out = subsequence(schedule, chosen, f"fast({schedule.name}, eps={eps})")
    out.refine_eps = eps
    out.certified_by = certified
    return out


def is_fast(schedule: FolnerSchedule, length: int, lam: int, eps,
            budget: int = 20_000) -> FastCheck:
    """Check ``defect(F_m, F_k) < eps`` for all ``k < m <= length`` with ``m >= k + lam``.

    Pairs whose sets are too large to enumerate fall back to the schedule's
    certified ``defect_bound``; the report says which route was used.
    """
    eps = positive(eps, "eps")
    route = "exact"
    for k in range(1, length + 1):
        for m in range(k + lam, length + 1):
            try:
                d, g = _defect_at(schedule, m, k, budget)
            except BudgetExceeded:
                if schedule.defect_bound is None:
                    raise
                d, g = schedule.defect_bound(m, k), None
                route = "bound"
            if d >= eps:
                return FastCheck(False, lam, eps, (k, m, g, d), route)
    return FastCheck(True, lam, eps, None, route)


# ---------------------------------------------------------------------------
# greedy computable construction


def ball_subset_enumerator(group: Group, gens=None, max_radius: int = 64,
                           budget: int = DEFAULT_ELEMENT_BUDGET):
    """Finite subsets ordered by (radius of the smallest ball holding them, size, lex).

    Elements inside a ball are ordered by word length, then by their sort key,
    so on Z the order is 0, -1, 1, -2, 2, ...  Returns ``enum(containing)``
    which yields only supersets of ``containing``.
    """
    def enum(containing=frozenset()) -> Iterator[frozenset]:
        need = frozenset(containing)
        order = []
        for r, layer in enumerate(_ball_layers(group, gens, max_radius, budget)):
            order.extend(sorted(layer, key=_sort_key))
            if not need <= set(order):
                continue
            free = [x for x in order if x not in need]
            for size in range(len(free) + 1):
                for extra in itertools.combinations(free, size):
                    s = need.union(extra)
                    # smallest enclosing ball must have radius exactly r
                    if s and (r == 0 or not s.isdisjoint(layer)):
                        yield s
    return enum


def _sort_key(g):
    if isinstance(g, tuple):
        return tuple(_sort_key(x) for x in g)
    if hasattr(g, "to_fraction"):
        return (g.to_fraction(),)
    return g


def greedy_computable_folner(group: Group, count: int, enumerator=None, horizon: int = 10 ** 6,
                             initial: Optional[FiniteSubset] = None) -> FolnerSchedule:
    """Greedy nested Følner sequence: ``F_n`` is the first enumerated superset of
    ``F_{n-1}`` with ``|F_n Δ g F_n| < |F_n| / n`` for every ``g`` in ``F_{n-1}``.

    ``F_1`` is the first nonempty enumerated set, or ``initial`` if given.
    Starting from ``{e}`` the sequence never grows, since ``{e}`` itself
    qualifies; seeding with a generating ball avoids that.  ``horizon`` caps
    the number of candidates examined per step.
    """
    enum = enumerator or ball_subset_enumerator(group)
    if initial is not None:
        first = frozenset(initial.materialize())
    else:
        first = next((s for s in enum() if s), None)
        if first is None:
            raise SearchExhausted("enumerator produced no nonempty set", last_index=0)
    sets = [FiniteSubset(group, first)]
    mul = group._mul
    while len(sets) < count:
        n = len(sets) + 1
        prev = sets[-1].materialize()
        found = None
        for tried, s in enumerate(enum(prev)):
            if tried >= horizon:
                break
            size = len(s)
            if all(n * 2 * (size - sum(1 for x in s if mul(g, x) in s)) < size for g in prev):
                found = s
                break
        if found is None:
            raise SearchExhausted(f"greedy construction stalled after F_{n - 1}",
                                  last_index=n - 1)
        sets.append(FiniteSubset(group, found, check=False))

    def at(n):
        if n > len(sets):
            raise SearchExhausted(f"only {len(sets)} greedy sets built", last_index=len(sets))
        return sets[n - 1]

    return FolnerSchedule(group, at, "greedy computable", kind="greedy",
                          modulus=closed_form_modulus("greedy"), nested=True)


# ---------------------------------------------------------------------------
# JSON


def subset_to_json(F: FiniteSubset) -> dict:
    G = F.group
    if isinstance(F, LatticeBox):
        return {"group": G.descriptor_json(), "kind": "box", "lo": list(F.lo), "hi": list(F.hi)}
    if isinstance(F, DyadicRows):
        rows = [{"level": n, "start": G.element_to_json((s, 0))["x"], "stepExp": e, "count": c}
                for n, (s, e, c) in sorted(F.rows.items())]
        return {"group": G.descriptor_json(), "kind": "dyadic-rows", "rows": rows}
    elems = sorted((G.element_to_json(g) for g in F.materialize()), key=repr)
    return {"group": G.descriptor_json(), "kind": "elements", "elements": elems}


def subset_from_json(data: dict) -> FiniteSubset:
    G = group_from_json(data["group"])
    kind = data.get("kind", "elements")
    if kind == "box":
        return LatticeBox(G, data["lo"], data["hi"])
    if kind == "dyadic-rows":
        rows = {}
        for r in data["rows"]:
            start = G.element_from_json({"x": r["start"], "n": 0})[0]
            rows[int(r["level"])] = (start, int(r["stepExp"]), int(r["count"]))
        return DyadicRows(rows)
    if kind == "elements":
        return FiniteSubset(G, [G.element_from_json(e) for e in data["elements"]])
    raise ValueError(f"unknown subset kind {kind!r}")


def schedule_to_json(schedule: FolnerSchedule, count: int) -> dict:
    out = {"name": schedule.name, "group": schedule.group.descriptor_json(),
           "sets": [subset_to_json(F) for F in schedule.prefix(count)]}
    if schedule.indices is not None:
        out["indices"] = list(schedule.indices[:count])
    return out


def schedule_from_json(data: dict) -> FolnerSchedule:
    sets = [subset_from_json(s) for s in data["sets"]]
    group = group_from_json(data["group"])

    def at(n):
        if n > len(sets):
            raise SearchExhausted(f"stored schedule has {len(sets)} sets", last_index=len(sets))
        return sets[n - 1]

    return FolnerSchedule(group, at, data.get("name", "stored"), indices=data.get("indices"))
