"""Counting fluctuations, metastability and upcrossings of sequences.

Indices are 1-based throughout, as in ``x_1, x_2, ...``.  The number of
eps-fluctuations is the length of the longest index chain whose consecutive
terms are at distance >= eps, minus one.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import mpmath

from .errors import BudgetExceeded, SearchExhausted
from .exact import as_fraction, positive
from .folner import DistanceFunction

DEFAULT_INDEX_CAP = 10 ** 6
BRUTE_FORCE_CAP = 18
_BUCKET_LIMIT = 256


# ---------------------------------------------------------------------------
# norms and sequences


class AbsNorm:
    """Absolute value on scalars."""
    name = "abs"

    def far(self, x, y, eps) -> bool:
        return abs(x - y) >= eps

    def norm(self, x):
        return abs(x)

    def to_json(self):
        return {"kind": "abs"}


class LpNorm:
    """Weighted l^p norm ``(sum_i w_i |v_i|^p)^(1/p)`` on tuples.

    Comparisons are exact for integer ``p`` and rational data (both sides are
    raised to the p-th power); other exponents go through 60-digit mpmath.
    """

    def __init__(self, p=2, weights=None):
        self.p = as_fraction(p)
        if self.p <= 1:
            raise ValueError("p must exceed 1")
        self.weights = None if weights is None else tuple(as_fraction(w) for w in weights)
        self.name = f"l{self.p}"

    def _w(self, n):
        return self.weights if self.weights is not None else (1,) * n

    def power_sum(self, v):
        p = self.p
        if p.denominator == 1:
            return sum(w * abs(c) ** p.numerator for w, c in zip(self._w(len(v)), v))
        with mpmath.workdps(60):
            return sum(_mp(w) * abs(_mp(c)) ** _mp(p) for w, c in zip(self._w(len(v)), v))

    def far(self, x, y, eps) -> bool:
        diff = tuple(a - b for a, b in zip(x, y))
        p = self.p
        if p.denominator == 1:
            return self.power_sum(diff) >= as_fraction(eps) ** p.numerator
        with mpmath.workdps(60):
            return self.power_sum(diff) >= _mp(eps) ** _mp(p)

    def norm(self, x):
        with mpmath.workdps(60):
            s = self.power_sum(x)
            s = s if isinstance(s, mpmath.mpf) else _mp(s)
            return float(s ** (1 / _mp(self.p)))

    def to_json(self):
        return {"kind": "lp", "p": str(self.p),
                "weights": None if self.weights is None else [str(w) for w in self.weights]}


def _mp(x):
    x = Fraction(x)
    return mpmath.mpf(x.numerator) / x.denominator


class NormedSeq:
    """Finite prefix ``x_1..x_N`` of a sequence in a normed space."""

    def __init__(self, values: Sequence, norm=None):
        self.values = list(values)
        if not self.values:
            raise ValueError("a sequence needs at least one term")
        if norm is None:
            norm = LpNorm(2) if isinstance(self.values[0], tuple) else AbsNorm()
        self.norm = norm

    def __len__(self):
        return len(self.values)

    def __getitem__(self, n: int):
        """Term ``x_n`` (1-based)."""
        if not 1 <= n <= len(self.values):
            raise IndexError(n)
        return self.values[n - 1]

    def far(self, i: int, j: int, eps) -> bool:
        return self.norm.far(self.values[i - 1], self.values[j - 1], eps)

    def scalar(self) -> bool:
        return isinstance(self.norm, AbsNorm)

    def to_json(self):
        return [_num_json(v) for v in self.values]

    @classmethod
    def from_json(cls, data, norm=None):
        return cls([_num_from_json(v) for v in data], norm)


def _num_json(v):
    if isinstance(v, tuple):
        return [_num_json(c) for c in v]
    if isinstance(v, Fraction) and v.denominator != 1:
        return str(v)
    if isinstance(v, Fraction):
        return v.numerator
    return v


def _num_from_json(v):
    if isinstance(v, list):
        return tuple(_num_from_json(c) for c in v)
    if isinstance(v, float):
        return v
    return as_fraction(v)


def as_seq(seq) -> NormedSeq:
    return seq if hasattr(seq, "far") else NormedSeq(seq)


# ---------------------------------------------------------------------------
# reports


@dataclass
class FluctuationReport:
    count: int
    witnesses: list
    mode: str
    eps: Fraction
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        d["eps"] = str(self.eps)
        d["params"] = {k: str(v) for k, v in self.params.items()}
        return d


def check_witnesses(seq, report: FluctuationReport, beta=None) -> bool:
    """Re-check that consecutive witnesses realize the report's inequality."""
    seq = as_seq(seq)
    w = report.witnesses
    if len(w) != report.count + 1 and not (report.count == 0 and len(w) <= 1):
        return False
    for a, b in zip(w, w[1:]):
        if not a < b or not seq.far(a, b, report.eps):
            return False
        if beta is not None and b < beta(a, report.eps):
            return False
    return True


# ---------------------------------------------------------------------------
# fluctuation counting


def _call_beta(beta, n, eps):
    return int(beta(n, eps))


def _longest_chain(seq, eps, beta=None):
    """Longest chain ``n_1 < ... < n_k`` with far consecutive terms and
    ``n_{i+1} >= beta(n_i)``.  Returns 1-based witness indices."""
    N = len(seq)
    releases = None
    if beta is not None:
        releases = [_call_beta(beta, i, eps) for i in range(1, N + 1)]
    monotone = releases is None or all(a <= b for a, b in zip(releases, releases[1:]))
    keys = None
    if seq.scalar() and monotone:
        distinct = set(seq.values)
        if len(distinct) <= _BUCKET_LIMIT:
            keys = sorted(distinct)
    length = [1] * (N + 1)
    prev = [0] * (N + 1)
    if keys is not None:
        # best chain ending at a released index, bucketed by value
        best: dict = {}
        nxt = 1
        for j in range(1, N + 1):
            while nxt < j and (releases is None or releases[nxt - 1] <= j):
                v = seq.values[nxt - 1]
                cur = best.get(v)
                if cur is None or length[nxt] > cur[0]:
                    best[v] = (length[nxt], nxt)
                nxt += 1
            xj = seq.values[j - 1]
            for v, (ln, i) in best.items():
                if ln + 1 > length[j] and seq.norm.far(v, xj, eps):
                    length[j], prev[j] = ln + 1, i
    else:
        for j in range(2, N + 1):
            for i in range(1, j):
                if releases is not None and releases[i - 1] > j:
                    continue
                if length[i] + 1 > length[j] and seq.far(i, j, eps):
                    length[j], prev[j] = length[i] + 1, i
    end = max(range(1, N + 1), key=lambda j: (length[j], -j))
    chain = []
    while end:
        chain.append(end)
        end = prev[end]
    return chain[::-1]


def count_fluctuations(seq, eps) -> FluctuationReport:
    seq = as_seq(seq)
    eps = positive(eps, "eps")
    chain = _longest_chain(seq, eps)
    return FluctuationReport(len(chain) - 1, chain, "plain", eps)


def count_fluctuations_at_distance(seq, eps, beta) -> FluctuationReport:
    """Fluctuations whose consecutive indices satisfy ``n_{i+1} >= beta(n_i, eps)``."""
    seq = as_seq(seq)
    eps = positive(eps, "eps")
    chain = _longest_chain(seq, eps, beta)
    return FluctuationReport(len(chain) - 1, chain, "atDistance", eps,
                             {"beta": getattr(beta, "name", "beta")})


def brute_fluctuations(seq, eps, beta=None) -> int:
    """Exhaustive maximum over index subsets (exponential; ``N <= 18``)."""
    seq = as_seq(seq)
    eps = positive(eps, "eps")
    N = len(seq)
    if N > BRUTE_FORCE_CAP:
        raise BudgetExceeded(f"brute force is capped at length {BRUTE_FORCE_CAP}",
                             cap=BRUTE_FORCE_CAP, required=N)
    for size in range(N, 1, -1):
        for idx in itertools.combinations(range(1, N + 1), size):
            if all(seq.far(a, b, eps) and (beta is None or b >= _call_beta(beta, a, eps))
                   for a, b in zip(idx, idx[1:])):
                return size - 1
    return 0


# ---------------------------------------------------------------------------
# metastability


class LazySeq:
    """Sequence given by ``value(n)``, constant from ``constant_from`` on."""

    def __init__(self, value: Callable[[int], object], constant_from: Optional[int] = None,
                 index_cap: int = DEFAULT_INDEX_CAP, name: str = "seq"):
        self.value = value
        self.constant_from = constant_from
        self.index_cap = index_cap
        self.name = name

    def prefix(self, length: int) -> NormedSeq:
        if length > self.index_cap:
            raise BudgetExceeded(f"prefix of length {length} exceeds index cap {self.index_cap}",
                                 cap=self.index_cap, required=length)
        return NormedSeq([self.value(n) for n in range(1, length + 1)])

    def __call__(self, n):
        return self.value(n)


def iterate(F: Callable[[int], int], times: int, start: int = 1, cap: Optional[int] = None) -> int:
    """``F^times(start)``; stops early once the value exceeds ``cap``."""
    x = start
    for _ in range(times):
        if cap is not None and x > cap:
            return x
        x = F(x)
    return x


@dataclass
class MetastabilityResult:
    N: Optional[int]
    window: Optional[tuple]
    scanned_to: int


def _window_free(values, eps, norm) -> bool:
    if isinstance(norm, AbsNorm):
        return max(values) - min(values) < eps
    return not any(norm.far(a, b, eps) for a, b in itertools.combinations(values, 2))


def metastable_index(seq, F: Callable[[int], int], eps, max_N: Optional[int] = None) -> MetastabilityResult:
    """Least ``N`` with no eps-fluctuation inside ``[N, F(N)]``.

    ``seq`` is a finite prefix or a :class:`LazySeq`.  For a lazy sequence
    that is constant from some index on, windows are cut at that index.
    """
    eps = positive(eps, "eps")
    if isinstance(seq, LazySeq):
        value, norm, c = seq.value, AbsNorm(), seq.constant_from
        length = None
        if max_N is None:
            max_N = (c or seq.index_cap) + 1
    else:
        seq = as_seq(seq)
        value, norm, c, length = seq.__getitem__, seq.norm, None, len(seq)
        if max_N is None:
            max_N = length
    if length is not None and F(1) > length:
        raise SearchExhausted("prefix too short to evaluate any window", last_index=0)
    for N in range(1, max_N + 1):
        hi = F(N)
        if hi < N:
            raise ValueError("F must satisfy F(n) >= n")
        if length is not None and hi > length:
            return MetastabilityResult(None, None, N - 1)
        top = hi if c is None else min(hi, max(c, N))
        if isinstance(seq, LazySeq) and top > seq.index_cap:
            raise BudgetExceeded("window exceeds index cap", cap=seq.index_cap, required=top)
        if _window_free([value(n) for n in range(N, top + 1)], eps, norm):
            return MetastabilityResult(N, (N, hi), N)
    return MetastabilityResult(None, None, max_N)


# ---------------------------------------------------------------------------
# mode conversions


def rate_to_fluctuation(rate: Callable) -> Callable:
    """A rate of convergence ``r`` bounds the fluctuations: ``lambda(eps) = r(eps)``."""
    return lambda eps: rate(eps)


def distance_to_metastability(lam_beta, beta, F: Callable[[int], int], eps,
                              index_cap: Optional[int] = None) -> int:
    """``Phi(F, eps) = Ft^(2 lam_beta(eps/2) + 3)(1)`` with ``Ft = max(F, beta(., eps/2))``."""
    eps = positive(eps, "eps")
    half = eps / 2
    lam = lam_beta(half) if callable(lam_beta) else int(lam_beta)
    Ft = lambda n: max(F(n), _call_beta(beta, n, half))
    x = 1
    for _ in range(2 * lam + 3):
        x = Ft(x)
        if index_cap is not None and x > index_cap:
            raise BudgetExceeded(f"iterate exceeds index cap {index_cap}", cap=index_cap,
                                 required=x)
    return x


def phi_family_S(F, eps, applied: bool = True):
    """Metastability bound for ``family_S``: 1 if eps > 1, else ``F^(F(1)+1)``.

    ``applied=False`` returns the iterate as a function instead of its value at 1.
    """
    if as_fraction(eps) > 1:
        return 1 if applied else (lambda n: 1)
    k = F(1) + 1
    return iterate(F, k) if applied else (lambda n: iterate(F, k, n))


def phi_family_S_prime(F, eps):
    if as_fraction(eps) > 1:
        return 1
    return iterate(F, F(1) + 2)


# ---------------------------------------------------------------------------
# counterexample families


def family_S(j: int, index_cap: int = DEFAULT_INDEX_CAP) -> LazySeq:
    """Zero up to ``x_j``, then ``x_n = (n - j) mod 2`` on ``[j, 2j]``, then constant.

    Exactly ``j`` 1-fluctuations.
    """
    if j < 1:
        raise ValueError("j must be at least 1")

    def value(n):
        if n < j:
            return 0
        return (min(n, 2 * j) - j) % 2

    return LazySeq(value, 2 * j, index_cap, f"S({j})")


def family_S_prime(j: int, beta, index_cap: int = DEFAULT_INDEX_CAP) -> LazySeq:
    """Block-stretched ``family_S(j)``: ``y_i = x_t`` on ``[bt^(t-1)(1), bt^t(1))``,
    ``bt(n) = beta(n, 1)``."""
    base = family_S(j)
    bounds = [1]
    while len(bounds) <= 2 * j:
        nxt = _call_beta(beta, bounds[-1], Fraction(1))
        if nxt <= bounds[-1]:
            raise ValueError("beta must be strictly increasing with beta(n) > n")
        if nxt > index_cap:
            raise BudgetExceeded("block boundary exceeds index cap", cap=index_cap, required=nxt)
        bounds.append(nxt)

    def value(i):
        for t in range(1, len(bounds)):
            if i < bounds[t]:
                return base(t)
        return base(2 * j)

    seq = LazySeq(value, bounds[2 * j - 1], index_cap, f"S'({j})")
    seq.blocks = bounds
    return seq


def family_superaffine(k: int, n_seq: Callable[[int], int] = lambda k: k * k,
                       index_cap: int = DEFAULT_INDEX_CAP) -> LazySeq:
    """Member ``k``: zero, except for even ``k`` the ``k`` terms after index
    ``n_seq(k)`` alternate 1, 0, 1, ..."""
    start = n_seq(k)

    def value(n):
        if k % 2 == 0 and start < n <= start + k:
            return (n - start) % 2
        return 0

    return LazySeq(value, start + k + 1, index_cap, f"superaffine({k})")


def superaffine_beta(n: int, eps=Fraction(1)) -> int:
    """``n + ceil(sqrt(n))``: at least ``n + k`` near ``n = k^2``."""
    return n + math.isqrt(n - 1) + 1 if n > 0 else 1


def family_step(n: int, index_cap: int = DEFAULT_INDEX_CAP) -> LazySeq:
    """``n`` zeros, then ones."""
    return LazySeq(lambda i: 0 if i <= n else 1, n + 1, index_cap, f"step({n})")


# ---------------------------------------------------------------------------
# upcrossings


def count_upcrossings(seq, alpha, beta_hi) -> FluctuationReport:
    """Greedy count of disjoint upcrossings of ``(alpha, beta_hi)``."""
    seq = as_seq(seq)
    if not alpha < beta_hi:
        raise ValueError("need alpha < beta'")
    witnesses, low = [], None
    for n in range(1, len(seq) + 1):
        x = seq[n]
        if low is None:
            if x <= alpha:
                low = n
        elif x >= beta_hi:
            witnesses.extend([low, n])
            low = None
    return FluctuationReport(len(witnesses) // 2, witnesses, "upcrossing",
                             Fraction(0), {"alpha": alpha, "beta": beta_hi})


def brute_upcrossings(seq, alpha, beta_hi) -> int:
    """Maximum number of disjoint upcrossings by dynamic programming over states."""
    seq = as_seq(seq)
    # state: (completed, waiting for high?) ; maximize completed
    best = {False: 0, True: None}
    for n in range(1, len(seq) + 1):
        x = seq[n]
        new = dict(best)
        if x <= alpha:
            new[True] = max(v for v in (best[True], best[False]) if v is not None)
        if best[True] is not None and x >= beta_hi:
            new[False] = max(new[False], best[True] + 1)
        best = new
    return max(v for v in best.values() if v is not None)


# ---------------------------------------------------------------------------
# learning procedure


@dataclass
class LearningTranscript:
    guesses: list
    mind_changes: int
    k: int
    beta: str
    triggers: list  # j at which each mind change fired

    def to_json(self):
        return asdict(self)


def learn_limit(seq, k: int, beta=None) -> LearningTranscript:
    """Learner that guesses ``c_0 = 1`` and moves to ``c_{i+1} = j`` at the least
    ``j`` with ``j >= beta(c_i)`` and ``d(x_j, x_{c_i}) >= 2^-k``."""
    seq = as_seq(seq)
    eps = Fraction(1, 2 ** k) if k >= 0 else Fraction(2 ** (-k))
    c = 1
    guesses, triggers = [1], []
    for j in range(2, len(seq) + 1):
        if beta is not None and j < _call_beta(beta, c, eps):
            continue
        if seq.far(j, c, eps):
            c = j
            guesses.append(j)
            triggers.append(j)
    return LearningTranscript(guesses, len(guesses) - 1, k,
                              getattr(beta, "name", "trivial" if beta is None else "beta"),
                              triggers)


def replay_transcript(seq, t: LearningTranscript, beta=None) -> bool:
    """True when ``t`` is exactly what :func:`learn_limit` would emit."""
    return learn_limit(seq, t.k, beta).guesses == t.guesses


def dumps(obj) -> str:
    return json.dumps(obj.to_json() if hasattr(obj, "to_json") else obj, sort_keys=True)
