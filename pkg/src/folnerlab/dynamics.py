"""Finite measure-preserving actions, ergodic averages and the bound verifiers.

Convention: ``(A_n f)(x) = (1/|F_n|) sum_{g in F_n} f(g.x)``.

Averages are exact.  A set ``F`` is pushed forward to the multiset of maps
it induces on the finite space (residues for tori, affine maps for BS(1,2)),
so averaging over astronomically large Følner sets costs time in the size of
the space, not of ``F``.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .convexity import UCModulus, check_eta, fluctuation_bound, lower_ratio, uc_modulus
from .errors import BudgetExceeded, CertificateError, DescriptorMismatch, FolnerLabError
from .exact import as_fraction, positive
from .folner import (DistanceFunction, FolnerSchedule, is_fast, max_defect)
from .groups import DEFAULT_ELEMENT_BUDGET, BaumslagSolitar12, Group, IntegerLattice
from .modes import count_fluctuations, count_fluctuations_at_distance, count_upcrossings
from .subsets import DyadicRows, FiniteSubset, LatticeBox

# inverse rectangles with more levels than this are averaged through an enclosure
EXACT_BS_LEVEL = 4000


# ---------------------------------------------------------------------------
# systems


class FiniteMPSystem:
    """A group acting on finitely many points, preserving the weights ``mu``."""

    def __init__(self, group: Group, points: Sequence, act: Callable, weights=None, name="system"):
        self.group = group
        self.points = list(points)
        self.index = {x: i for i, x in enumerate(self.points)}
        self._act = act
        n = len(self.points)
        self.weights = [Fraction(1, n)] * n if weights is None else [as_fraction(w) for w in weights]
        if sum(self.weights) != 1 or any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive and sum to 1")
        self.uniform = len(set(self.weights)) == 1
        self.name = name

    def __len__(self):
        return len(self.points)

    def act(self, g, x):
        self.group.check(g)
        return self._act(g, x)

    def permutation(self, g) -> list:
        return [self.index[self._act(g, x)] for x in self.points]

    def check_invariants(self, samples: Sequence = ()) -> None:
        """Identity, homomorphism on generator pairs and ``samples``, measure preservation."""
        G = self.group
        e = G.identity()
        if self.permutation(e) != list(range(len(self))):
            raise AssertionError("identity does not act trivially")
        gens = G.symmetrize(G.generators())
        pairs = list(itertools.product(gens, repeat=2)) + list(samples)
        for g, h in pairs:
            gh = G.multiply(g, h)
            for x in self.points:
                if self._act(gh, x) != self._act(g, self._act(h, x)):
                    raise AssertionError(f"act({gh}) != act({g}) o act({h}) at {x}")
        for g in gens:
            perm = self.permutation(g)
            if sorted(perm) != list(range(len(self))):
                raise AssertionError(f"{g} does not act bijectively")
            if any(self.weights[i] != self.weights[j] for i, j in enumerate(perm)):
                raise AssertionError(f"{g} does not preserve the measure")

    # -- averaging --------------------------------------------------------
    def pushforward(self, F: FiniteSubset, budget=DEFAULT_ELEMENT_BUDGET) -> Counter:
        """Multiset of point permutations induced by the elements of ``F``."""
        out = Counter()
        for g in F.materialize(budget):
            out[tuple(self.permutation(g))] += 1
        return out

    def sum_over(self, F: FiniteSubset, v: list) -> list:
        """``sum_{g in F} v(g.x)`` for integer-valued ``v``, as exact integers."""
        res = [0] * len(self)
        for perm, c in self.pushforward(F).items():
            for i, j in enumerate(perm):
                res[i] += c * v[j]
        return res

    def orbits(self) -> list:
        gens = self.group.symmetrize(self.group.generators())
        seen, out = set(), []
        for x in self.points:
            if x in seen:
                continue
            orb, stack = {x}, [x]
            while stack:
                y = stack.pop()
                for g in gens:
                    z = self._act(g, y)
                    if z not in orb:
                        orb.add(z)
                        stack.append(z)
            seen |= orb
            out.append(sorted(self.index[y] for y in orb))
        return out


class TorusSystem(FiniteMPSystem):
    """``Z^d`` acting on ``(Z/N)^d`` by translation."""

    def __init__(self, d: int, N: int):
        if N < 1:
            raise ValueError("N must be at least 1")
        pts = list(itertools.product(range(N), repeat=d))
        super().__init__(IntegerLattice(d), pts,
                         lambda g, x: tuple((a + b) % N for a, b in zip(g, x)),
                         name=f"torus(d={d},N={N})")
        self.d, self.N = d, N

    def sum_over(self, F, v):
        if not isinstance(F, LatticeBox):
            counts = Counter()
            for g in F.materialize():
                counts[tuple(c % self.N for c in g)] += 1
            return self._convolve(counts, v)
        arr = np.empty((self.N,) * self.d, dtype=object)
        arr.flat[:] = [int(x) for x in v]
        for axis, (lo, hi) in enumerate(zip(F.lo, F.hi)):
            base, extra = divmod(hi - lo + 1, self.N)
            counts = [base] * self.N
            for t in range(extra):
                counts[(lo + t) % self.N] += 1
            acc = np.zeros_like(arr)
            acc.fill(0)
            for r, c in enumerate(counts):
                if c:
                    acc = acc + c * np.roll(arr, -r, axis=axis)
            arr = acc
        return [int(x) for x in arr.flat]

    def _convolve(self, counts, v):
        N = self.N
        res = [0] * len(self)
        for i, x in enumerate(self.points):
            for r, c in counts.items():
                res[i] += c * v[self.index[tuple((a + b) % N for a, b in zip(x, r))]]
        return res


class BS12AffineSystem(FiniteMPSystem):
    """BS(1,2) acting on ``Z/q`` (``q`` odd) by ``(x, n).y = 2^n y + x``."""

    def __init__(self, q: int):
        if q < 3 or q % 2 == 0:
            raise ValueError("q must be odd and at least 3 (2 must be invertible)")
        super().__init__(BaumslagSolitar12(), list(range(q)),
                         lambda g, y: (pow(2, g[1], q) * y + g[0].mod(q)) % q,
                         name=f"bs12(q={q})")
        self.q = q
        self.order = next(t for t in range(1, q + 1) if pow(2, t, q) == 1)

    def sum_over(self, F, v):
        q = self.q
        if isinstance(F, DyadicRows):
            counts = F.affine_counts(q)
        else:
            counts = Counter()
            for g in F.materialize():
                counts[(pow(2, g[1], q), g[0].mod(q))] += 1
        res = [0] * q
        for (u, w), c in counts.items():
            for y in range(q):
                res[y] += c * v[(u * y + w) % q]
        return res

    def inverse_rectangle_parts(self, k: int, v: list):
        """Decompose ``sum`` over ``R_{4^k,k}^{-1}`` as ``mean*|F| + (2k+1) * G``.

        Returns ``(G, e)`` with ``G`` integer-valued times ``q`` (see
        :meth:`symbolic_average`).  Level ``l`` contributes
        ``sum_{|i| <= m} v(2^l y + 2^(l-k) i)``; whole blocks of ``q``
        consecutive ``i`` sum to ``sum(v)``, and the leftover ``e = W mod q``
        terms start at ``i = -m``.
        """
        q, T = self.q, self.order
        W_mod = (2 * pow(4, k, q) + 1) % q
        e = W_mod
        m_mod = pow(4, k, q)
        total = sum(v)
        # levels l in [-k, k] grouped by l mod T
        per_class = Counter((l % T) for l in range(-k, -k + min(2 * k + 1, T)))
        if 2 * k + 1 > T:
            per_class = Counter()
            for r in range(T):
                first = -k + ((r - (-k)) % T)
                if first <= k:
                    per_class[r] = (k - first) // T + 1
        G = [0] * q  # q * sum over levels of (E_l(y) - e * mean)
        for r, nlev in per_class.items():
            u = pow(2, r, q)
            s = pow(2, (r - k) % T, q)
            for y in range(q):
                E = sum(v[(u * y + s * (t - m_mod)) % q] for t in range(e))
                G[y] += nlev * (q * E - e * total)
        return G, e


def make_torus_system(d: int, N: int) -> TorusSystem:
    return TorusSystem(d, N)


def make_bs12_affine_system(q: int) -> BS12AffineSystem:
    return BS12AffineSystem(q)


# ---------------------------------------------------------------------------
# observables


class Observable:
    """Rational-valued function on the points of a system."""

    def __init__(self, system: FiniteMPSystem, values: Sequence):
        if len(values) != len(system):
            raise ValueError("one value per point required")
        self.system = system
        self.values = tuple(as_fraction(v) for v in values)

    def as_integers(self) -> tuple[list, int]:
        D = math.lcm(*(v.denominator for v in self.values)) if self.values else 1
        return [int(v * D) for v in self.values], D

    def norm_sq(self) -> Fraction:
        return sum((w * v * v for w, v in zip(self.system.weights, self.values)), Fraction(0))

    def lp_power(self, p: int) -> Fraction:
        return sum((w * abs(v) ** p for w, v in zip(self.system.weights, self.values)), Fraction(0))

    def l1(self) -> Fraction:
        return self.lp_power(1)

    def mean(self) -> Fraction:
        return sum((w * v for w, v in zip(self.system.weights, self.values)), Fraction(0))

    def __sub__(self, other):
        return Observable(self.system, [a - b for a, b in zip(self.values, other.values)])

    def __eq__(self, other):
        return isinstance(other, Observable) and self.values == other.values

    def __hash__(self):
        return hash(self.values)

    def to_json(self):
        return {"system": self.system.name,
                "values": [str(v) for v in self.values]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["point", "value"])
        for x, v in zip(self.system.points, self.values):
            w.writerow([json.dumps(list(x)) if isinstance(x, tuple) else x, str(v)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, system, text: str):
        rows = list(csv.DictReader(io.StringIO(text)))
        vals = {}
        for r in rows:
            key = r["point"]
            pt = tuple(json.loads(key)) if key.startswith("[") else int(key)
            vals[pt] = as_fraction(r["value"])
        return cls(system, [vals[x] for x in system.points])

    @classmethod
    def from_json(cls, system, data):
        return cls(system, [as_fraction(v) for v in data["values"]])


def random_observable(system, rng, scale: int = 8, nonnegative=False, unit_ball=True) -> Observable:
    """Random integer values in ``[-scale, scale]``, optionally scaled into the unit ball."""
    lo = 0 if nonnegative else -scale
    v = [rng.randint(lo, scale) for _ in range(len(system))]
    f = Observable(system, v)
    if unit_ball:
        n2 = f.norm_sq()
        if n2 > 1:
            s = math.isqrt(math.ceil(n2)) + 1
            f = Observable(system, [Fraction(x, s) for x in v])
    return f


# ---------------------------------------------------------------------------
# averages


@dataclass
class AverageEnclosure:
    """``center`` (exact) with ``|A f - center| <= radius`` pointwise."""
    center: tuple
    radius: Fraction

    @property
    def exact(self):
        return self.radius == 0


def _check_group(sys, schedule):
    if schedule.group != sys.group:
        raise DescriptorMismatch(f"schedule on {schedule.group}, system on {sys.group}")


def average_set(sys: FiniteMPSystem, F: FiniteSubset, f: Observable) -> Observable:
    v, D = f.as_integers()
    total = sys.sum_over(F, v)
    n = F.cardinality() * D
    return Observable(sys, [Fraction(t, n) for t in total])


def symbolic_bs12_average(sys: BS12AffineSystem, k: int, f: Observable) -> AverageEnclosure:
    """``A f`` over ``R_{4^k,k}^{-1}`` equals ``mean(f) + G / ((2k+1) W q)``.

    ``W = 2*4^k + 1``.  For ``k <= EXACT_BS_LEVEL`` the value is returned
    exactly; beyond that the center is ``mean(f)`` and the radius bounds
    ``|G| / ((2k+1) W q)`` using ``W > 2^(2 EXACT_BS_LEVEL + 1)``.
    """
    v, D = f.as_integers()
    G, e = sys.inverse_rectangle_parts(k, v)
    q = sys.q
    mean = Fraction(sum(v), q * D)
    if k <= EXACT_BS_LEVEL:
        W = 2 * 4 ** k + 1
        den = (2 * k + 1) * W * q * D
        return AverageEnclosure(tuple(mean + Fraction(g, den) for g in G), Fraction(0))
    bound = max((abs(g) for g in G), default=0)
    radius = Fraction(bound, (2 * k + 1) * q * D * 2 ** (2 * EXACT_BS_LEVEL + 1))
    return AverageEnclosure((mean,) * q, radius)


def average_enclosure(sys, schedule: FolnerSchedule, n: int, f: Observable) -> AverageEnclosure:
    _check_group(sys, schedule)
    if isinstance(sys, BS12AffineSystem) and schedule.bs12_param is not None:
        return symbolic_bs12_average(sys, schedule.bs12_param(n), f)
    if not schedule.cheap(n):
        raise BudgetExceeded(f"set {n} of {schedule.name} is too large to average")
    return AverageEnclosure(average_set(sys, schedule.set_at(n), f).values, Fraction(0))


def ergodic_average(sys, schedule: FolnerSchedule, n: int, f: Observable) -> Observable:
    """Exact ``A_n f``."""
    enc = average_enclosure(sys, schedule, n, f)
    if not enc.exact:
        raise BudgetExceeded(f"A_{n} f is only available as an enclosure of radius {float(enc.radius):.3g}")
    return Observable(sys, enc.center)


def mean_projection(sys: FiniteMPSystem, f: Observable) -> Observable:
    """Orbitwise weighted average: projection onto the invariant functions."""
    out = [Fraction(0)] * len(sys)
    for orb in sys.orbits():
        mass = sum(sys.weights[i] for i in orb)
        avg = sum(sys.weights[i] * f.values[i] for i in orb) / mass
        for i in orb:
            out[i] = avg
    return Observable(sys, out)


# ---------------------------------------------------------------------------
# sequences of averages


class AverageSeq:
    """The sequence ``(A_n f)`` as a :mod:`modes` sequence under the weighted L^p norm.

    Comparisons are exact for exact terms.  When terms are enclosures,
    ``mode`` decides undetermined pairs: ``"upper"`` counts them as far
    (an over-count, sound for upper-bound checks), ``"lower"`` as near.
    """

    def __init__(self, system, terms: list, p: int = 2, mode: str = "upper"):
        self.system = system
        self.terms = terms
        self.p = p
        self.mode = mode
        self.undecided = 0
        self._cache: dict = {}

    def __len__(self):
        return len(self.terms)

    def scalar(self):
        return False

    def _dist_power(self, a, b):
        p = self.p
        return sum((w * abs(x - y) ** p for w, x, y in zip(self.system.weights, a, b)), Fraction(0))

    def state(self, i, j, eps) -> Optional[bool]:
        key = (min(i, j), max(i, j), eps)
        if key in self._cache:
            return self._cache[key]
        a, b = self.terms[i - 1], self.terms[j - 1]
        d = self._dist_power(a.center, b.center)
        R = a.radius + b.radius
        p = self.p
        if R == 0:
            res = d >= eps ** p
        else:
            # || center diff ||_p is within R of the true distance (weights sum to 1)
            if d >= (eps + R) ** p:
                res = True
            elif eps > R and d < (eps - R) ** p:
                res = False
            else:
                res = None
        self._cache[key] = res
        return res

    def far(self, i, j, eps) -> bool:
        s = self.state(i, j, eps)
        if s is None:
            self.undecided += 1
            return self.mode == "upper"
        return s

    def norm_sq(self, i) -> tuple[Fraction, Fraction]:
        """Bounds on ``||A_i f||_2^2``."""
        t = self.terms[i - 1]
        c2 = sum((w * x * x for w, x in zip(self.system.weights, t.center)), Fraction(0))
        if t.radius == 0:
            return c2, c2
        # ||c|| - R <= ||A f|| <= ||c|| + R, squared via (|a|+R)^2 <= 2a^2 + 2R^2 style bounds
        c = max(t.center, key=abs)
        hi = (abs(c) + t.radius) ** 2
        return Fraction(0), hi


def averages(sys, schedule, f: Observable, n_max: int, p: int = 2, mode="upper") -> AverageSeq:
    return AverageSeq(sys, [average_enclosure(sys, schedule, n, f) for n in range(1, n_max + 1)],
                      p=p, mode=mode)


# ---------------------------------------------------------------------------
# verifier reports


@dataclass
class Report:
    theorem: str
    parameters: dict
    bound: object
    observed: object
    verdict: bool
    witnesses: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"theorem": self.theorem,
                "parameters": {k: _jsonable(v) for k, v in self.parameters.items()},
                "bound": _jsonable(self.bound), "observedCount": _jsonable(self.observed),
                "witnesses": [_jsonable(w) for w in self.witnesses],
                "verdict": "pass" if self.verdict else "fail",
                **{k: _jsonable(v) for k, v in self.extra.items()}}

    def __bool__(self):
        return self.verdict


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else v.numerator
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (bool, int, float, str)) or v is None:
        return v
    return str(v)


# ---------------------------------------------------------------------------
# averaging lemma


def averaging_lemma_check(sys, schedule: FolnerSchedule, beta, N: int, eta, f: Observable) -> Report:
    """``||A_K f - A_K A_N f|| < eta ||f||`` with ``K = beta(N, eta)``, in exact L^2."""
    eta = positive(eta, "eta")
    K = beta(N, eta) if callable(beta) else int(beta)
    AN = ergodic_average(sys, schedule, N, f)
    AK = ergodic_average(sys, schedule, K, f)
    AKN = ergodic_average(sys, schedule, K, AN)
    gap_sq = (AK - AKN).norm_sq()
    rhs = eta * eta * f.norm_sq()
    ok = gap_sq < rhs or (gap_sq == 0 and rhs == 0)
    return Report("averaging lemma", {"N": N, "K": K, "eta": eta, "system": sys.name,
                                      "schedule": schedule.name},
                  bound=rhs, observed=gap_sq, verdict=ok,
                  extra={"gapSquared": gap_sq, "gapFloat": math.sqrt(gap_sq),
                         "boundFloat": math.sqrt(rhs)})


# ---------------------------------------------------------------------------
# main fluctuation theorem


def verify_main_bound(sys, schedule: FolnerSchedule, beta, f: Observable, eps, eta,
                      n_max: int, p: int = 2, u: Optional[UCModulus] = None) -> Report:
    """Count eps-fluctuations of ``(A_n f)`` at distance ``beta(n, eta/(3||f||))``.

    The distance parameter is a rational just below ``eta/(3||f||)``; a
    modulus for a smaller tolerance is a modulus for the larger one too.
    """
    if p != 2:
        raise ValueError("the verifier evaluates the exact L^2 norm; p must be 2")
    eps, eta = positive(eps, "eps"), positive(eta, "eta")
    u = u or uc_modulus(p)
    check_eta(u, eps, eta)
    n2 = f.norm_sq()
    params = {"eps": eps, "eta": eta, "nMax": n_max, "p": p, "system": sys.name,
              "schedule": schedule.name}
    if n2 == 0:
        return Report("main fluctuation bound", params, 0, 0, True)
    bound = fluctuation_bound(u, eps, eta, n2)
    tol = lower_ratio(eta, n2)
    dist = DistanceFunction(lambda n, e: beta(n, tol), f"beta(n,{tol})")
    seq = averages(sys, schedule, f, n_max, p)
    rep = count_fluctuations_at_distance(seq, eps, dist)
    L_lo = min(seq.norm_sq(i)[0] for i in range(1, n_max + 1))
    try:
        sharp = fluctuation_bound(u, eps, eta, n2, L_lo)
    except ArithmeticError:
        sharp = None
    return Report("main fluctuation bound", {**params, "distanceTol": tol},
                  bound=bound, observed=rep.count, verdict=rep.count <= bound,
                  witnesses=rep.witnesses,
                  extra={"sharpenedBound": sharp, "undecidedPairs": seq.undecided})


def verify_fast_corollary(sys, prefix: FolnerSchedule, length: int, lam: int, f: Observable,
                          eps, eta, p: int = 2, u: Optional[UCModulus] = None) -> Report:
    """Plain fluctuation count of ``(A_n f)`` over a (lam, eta/(3||f||))-fast prefix."""
    eps, eta = positive(eps, "eps"), positive(eta, "eta")
    u = u or uc_modulus(p)
    check_eta(u, eps, eta)
    n2 = f.norm_sq()
    params = {"eps": eps, "eta": eta, "lambda": lam, "length": length, "system": sys.name,
              "schedule": prefix.name}
    if n2 == 0:
        return Report("fast corollary", params, lam, 0, True)
    tol = lower_ratio(eta, n2)
    fast = is_fast(prefix, length, lam, tol)
    if not fast:
        raise FolnerLabError(f"prefix is not ({lam},{tol})-fast: witness {fast.witness}")
    bound = lam * fluctuation_bound(u, eps, eta, n2) + lam
    seq = averages(sys, prefix, f, length, p)
    rep = count_fluctuations(seq, eps)
    return Report("fast corollary", {**params, "fastTol": tol, "fastRoute": fast.certified_by},
                  bound=bound, observed=rep.count, verdict=rep.count <= bound,
                  witnesses=rep.witnesses, extra={"undecidedPairs": seq.undecided})


# ---------------------------------------------------------------------------
# slow-rate construction on Z^d


@dataclass
class L2GVector:
    """Finitely supported ``f = scale * phi`` on ``Z^d`` with ``scale^2`` rational.

    ``phi`` is an integer array on the box ``origin + [0, shape)``.
    """
    phi: np.ndarray
    origin: tuple
    scale_sq: Fraction

    def norm_sq(self) -> Fraction:
        return self.scale_sq * int(np.sum(self.phi.astype(object) ** 2))

    def total(self) -> Fraction:
        return int(np.sum(self.phi.astype(object)))

    def support(self) -> dict:
        out = {}
        for idx in zip(*np.nonzero(self.phi)):
            out[tuple(int(o + i) for o, i in zip(self.origin, idx))] = int(self.phi[idx])
        return out


def _box_sum(arr: np.ndarray, n: int) -> np.ndarray:
    """``out[x] = sum_{|g_i| <= n} arr[x + g]`` with zero padding, same shape as ``arr``."""
    out = arr.astype(np.int64)
    for axis in range(arr.ndim):
        pad = [(0, 0)] * arr.ndim
        pad[axis] = (n + 1, n)
        c = np.cumsum(np.pad(out, pad), axis=axis)
        hi = [slice(None)] * arr.ndim
        lo = [slice(None)] * arr.ndim
        L = out.shape[axis]
        hi[axis] = slice(2 * n + 1, 2 * n + 1 + L)
        lo[axis] = slice(0, L)
        out = c[tuple(hi)] - c[tuple(lo)]
    return out


def slow_rate_demo(schedule: FolnerSchedule, alpha, n: int, max_index: int = 10 ** 7) -> Report:
    """Unit vector ``f`` in ``l^2(Z^d)`` with ``P f = 0`` and ``||A_n f|| > alpha_n``.

    ``f = (1_B - 1_{Bk}) / sqrt(2|B|)`` with ``B = F_m`` a box and ``k`` moving
    ``B`` off itself.  ``m`` is least with ``defect(F_m, F_n) < eps^2/9``,
    ``eps = (1 - alpha_n)/2``; the verdict compares squared norms exactly.
    """
    a_n = as_fraction(alpha(n) if callable(alpha) else alpha[n - 1])
    if not 0 < a_n < 1:
        raise ValueError(f"alpha_{n} = {a_n} must lie in (0, 1)")
    G = schedule.group
    if not isinstance(G, IntegerLattice) or not schedule.monotone:
        raise ValueError("slow_rate_demo runs on box or interval schedules over Z^d")
    eps = (1 - a_n) / 2
    budget = eps * eps / 9
    Fn = schedule.set_at(n)
    if not isinstance(Fn, LatticeBox):
        raise ValueError("box schedules only")
    # galloping search for m (defects fall monotonically in m)
    ok = lambda m: max_defect(schedule.set_at(m), Fn)[0] < budget
    hi = max(n, 1)
    while not ok(hi):
        hi *= 2
        if hi > max_index:
            raise BudgetExceeded(f"B = F_m needs m > {max_index}", cap=max_index, required=hi)
    lo = hi // 2 + 1 if hi > n else 1
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    m = lo
    B = schedule.set_at(m)
    side = B.sides()
    shift = (side[0],) + (0,) * (G.d - 1)
    Fside = Fn.sides()
    if not all(s == Fside[0] for s in Fside) or Fn.lo != tuple(-x for x in Fn.hi):
        raise ValueError("F_n must be a centered cube")
    r = Fn.hi[0]
    # grid covering supp(phi) and its F_n-neighbourhood
    origin = tuple(l - r for l in B.lo)
    shape = [s + 2 * r for s in side]
    shape[0] += side[0]
    phi = np.zeros(shape, dtype=np.int64)
    core = tuple(slice(r, r + s) for s in side)
    phi[core] = 1
    moved = (slice(r + side[0], r + 2 * side[0]),) + core[1:]
    phi[moved] = -1
    sums = _box_sum(phi, r)  # |F_n| * A_n phi, since F_n = [-r, r]^d
    size_n = Fn.cardinality()
    size_b = B.cardinality()
    diff = sums.astype(object) - size_n * phi.astype(object)
    lhs = int(np.sum(diff ** 2))          # |F_n|^2 ||A_n phi - phi||^2
    rhs = eps * eps * 2 * size_b * size_n ** 2
    avg_sq = int(np.sum(sums.astype(object) ** 2))
    lower = (1 - eps) ** 2 * 2 * size_b * size_n ** 2
    f = L2GVector(phi, origin, Fraction(1, 2 * size_b))
    close = lhs < rhs
    big = avg_sq > lower
    verdict = close and big and (1 - eps) > a_n and f.norm_sq() == 1 and f.total() == 0
    return Report("slow rate", {"n": n, "alpha_n": a_n, "eps": eps, "m": m, "k": shift,
                                "schedule": schedule.name},
                  bound=eps, observed=math.sqrt(lhs / (2 * size_b * size_n ** 2)),
                  verdict=verdict,
                  extra={"normAnf": math.sqrt(avg_sq / (2 * size_b * size_n ** 2)),
                         "gapSquaredScaled": lhs, "gapSquaredBoundScaled": rhs,
                         "unitNorm": f.norm_sq() == 1, "meanZero": f.total() == 0,
                         "vector": f})


# ---------------------------------------------------------------------------
# Bishop upcrossing inequality


def bishop_upcrossings_check(sys: TorusSystem, f: Observable, alpha, beta_hi, k: int,
                             horizon: int = 64) -> Report:
    """``mu(#upcrossings of (alpha, beta') >= k) <= ||f||_1 / (k (beta' - alpha))``
    along the Cesaro averages ``(1/n) sum_{i<n} f(x + i)``."""
    if not (isinstance(sys, TorusSystem) and sys.d == 1):
        raise ValueError("needs a single-generator system (d = 1 torus)")
    alpha, beta_hi = as_fraction(alpha), as_fraction(beta_hi)
    if not alpha < beta_hi or k < 1:
        raise ValueError("need alpha < beta' and k >= 1")
    if any(v < 0 for v in f.values):
        raise ValueError("f must be nonnegative")
    N = sys.N
    mass = Fraction(0)
    worst = []
    for x in range(N):
        run, seq = Fraction(0), []
        for n in range(1, horizon + 1):
            run += f.values[(x + n - 1) % N]
            seq.append(run / n)
        c = count_upcrossings(seq, alpha, beta_hi).count
        if c >= k:
            mass += sys.weights[x]
            worst.append(x)
    bound = f.l1() / (k * (beta_hi - alpha))
    return Report("bishop upcrossings", {"alpha": alpha, "beta": beta_hi, "k": k,
                                         "horizon": horizon, "system": sys.name},
                  bound=bound, observed=mass, verdict=mass <= bound, witnesses=worst)


# ---------------------------------------------------------------------------
# rate of convergence from the limit norm


@dataclass
class RateCertificate:
    m: int
    i: int
    u_norm: float
    residual: float
    horizon: int
    max_gap: float
    eps: float
    passed: bool

    def to_json(self):
        return dict(self.__dict__)


def koopman_cyclic(N: int) -> np.ndarray:
    """Matrix of ``(T f)(x) = f(x + 1 mod N)``."""
    T = np.zeros((N, N))
    for x in range(N):
        T[x, (x + 1) % N] = 1.0
    return T


def rate_from_limit_norm(T, f, limit_norm: float, eps: float, weights=None,
                         horizon_factor: int = 10, tol: float = 1e-9) -> RateCertificate:
    """An ``m`` with ``||A_n f - A_m f|| < eps`` for ``n >= m``, from ``T``, ``f`` and ``||Pf||``.

    ``g = f - Pf`` has ``||g||^2 = ||f||^2 - ||Pf||^2``.  Project ``f`` onto
    ``span{T^j f - T^(j+1) f : j <= i}`` to get ``g_i = (I - T) u`` with
    ``u = sum_j c_j T^j f``, stop once ``sqrt(2 (||g|| - ||g_i||) ||f||) < eps/4``,
    and take ``m > 8 ||u|| / eps`` so that ``||A_n g_i|| <= 2||u||/n < eps/4``.
    """
    T = np.asarray(T, dtype=float)
    f = np.asarray(f, dtype=float)
    n = len(f)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    sw = np.sqrt(w)
    ip = lambda a, b: float(np.sum(w * a * b))
    nrm = lambda a: math.sqrt(max(ip(a, a), 0.0))
    op = np.linalg.norm((sw[:, None] * T) / sw[None, :], 2)
    if op > 1 + 1e-12:
        raise ValueError(f"||T|| = {op} exceeds 1")
    fn = nrm(f)
    if eps > 2 * fn:
        return RateCertificate(1, 0, 0.0, 0.0, 0, 0.0, eps, True)
    g_norm = math.sqrt(max(fn * fn - limit_norm * limit_norm, 0.0))
    powers = [f]
    i, u, resid = 0, np.zeros(n), 0.0
    while True:
        powers.append(T @ powers[-1])
        D = np.stack([powers[j] - powers[j + 1] for j in range(i + 1)], axis=1)
        # weighted least squares: minimize ||sw * (D c - f)||
        c, *_ = np.linalg.lstsq(sw[:, None] * D, sw * f, rcond=None)
        gi = D @ c
        gap = max(g_norm - nrm(gi), 0.0)
        if math.sqrt(2 * gap * fn) < eps / 4 or i >= 4 * n:
            u = sum(cj * powers[j] for j, cj in enumerate(c))
            resid = nrm((u - T @ u) - gi)
            if resid > tol * max(1.0, nrm(gi)):
                raise CertificateError(f"linear solve residual {resid} exceeds tolerance")
            if math.sqrt(2 * gap * fn) >= eps / 4:
                raise CertificateError("projection did not reach ||g||; limit norm inconsistent")
            break
        i += 1
    un = nrm(u)
    m = int(8 * un / eps) + 1
    horizon = horizon_factor * m
    # Cesaro averages A_n f for n <= horizon
    cur, acc = f.copy(), np.zeros(n)
    Am, worst = None, 0.0
    for k in range(1, horizon + 1):
        acc += cur
        cur = T @ cur
        if k == m:
            Am = acc / m
        if k >= m:
            worst = max(worst, nrm(acc / k - Am))
    return RateCertificate(m, i, un, resid, horizon, worst, eps, worst < eps)
