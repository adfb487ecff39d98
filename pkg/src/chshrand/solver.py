"""Optimisation over setting distributions and uniform setting supports.

The distribution problem asks for the smallest ``(max p_X * max p_Y)^(1/n)``
subject to the (1,1)-density ``(1/n) E[x.y] <= c``; the support problem
restricts both sides to uniform distributions on sets. The support problem
is solved exactly for n <= 3 (n = 4 on request); the distribution problem
is bracketed between the support optimum and a factor 3^(2/n) below it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Union

import numpy as np

from . import kernels
from .coremath import C_Q_EXACT, DomainError, binary_entropy, f_value, independent_bound
from .profile import (
    Profile,
    SettingSet,
    as_fraction,
    bits_of,
    column_bit,
    discretize,
    gamma,
    inner_density,
)

Mass = Union[Fraction, float]

# Heuristic search materialises all 2^n strings.
HEURISTIC_MAX_N = 12


class InfeasibleError(ValueError):
    """The supplied configuration violates the density constraint."""


def parse_level(c) -> Fraction:
    """Constraint level as an exact rational in (0, 1/4]."""
    c = as_fraction(c)
    if not 0 < c <= Fraction(1, 4):
        raise DomainError(f"constraint level must lie in (0, 1/4], got {c}")
    return c


def level_text(c: Fraction) -> str:
    """Plain decimal when the rational has a terminating expansion, else p/q."""
    d = c.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return str(c)
    digits = max(twos, fives)
    scaled = c.numerator * 10**digits // c.denominator
    if digits == 0:
        return str(scaled)
    sign = "-" if scaled < 0 else ""
    body = str(abs(scaled)).rjust(digits + 1, "0")
    return f"{sign}{body[:-digits]}.{body[-digits:]}"


@dataclass
class ProductDistribution:
    n: int
    p_x: dict[int, Mass]
    p_y: dict[int, Mass]

    def __post_init__(self) -> None:
        for name, p in (("p_x", self.p_x), ("p_y", self.p_y)):
            if not p:
                raise ValueError(f"{name} has empty support")
            if any(v < 0 for v in p.values()):
                raise ValueError(f"{name} has a negative mass")
            if any(not 0 <= k < (1 << self.n) for k in p):
                raise ValueError(f"{name} has a string outside {{0,1}}^{self.n}")
            total = sum(p.values())
            if self.exact:
                if total != 1:
                    raise ValueError(f"{name} sums to {total}, not 1")
            elif abs(float(total) - 1.0) > 1e-12:
                raise ValueError(f"{name} sums to {float(total)!r}, not 1")

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (Fraction, int)) for p in (self.p_x, self.p_y) for v in p.values())

    def support_x(self) -> SettingSet:
        return SettingSet(self.n, [k for k, v in self.p_x.items() if v > 0])

    def support_y(self) -> SettingSet:
        return SettingSet(self.n, [k for k, v in self.p_y.items() if v > 0])


def _column_means(p: Mapping[int, Mass], n: int) -> list:
    means = [0] * n
    for code, mass in p.items():
        for i in range(n):
            if column_bit(code, n, i):
                means[i] = means[i] + mass
    return means


def constraint_density(x_side, y_side=None):
    """(1/n) E[x.y] for two setting sets or for a ProductDistribution.

    Sets go through their profiles, so the cost is linear in the set sizes.
    The result is an exact Fraction unless float masses are involved.
    """
    if isinstance(x_side, ProductDistribution) and y_side is None:
        d = x_side
        mx, my = _column_means(d.p_x, d.n), _column_means(d.p_y, d.n)
        total = sum(a * b for a, b in zip(mx, my))
        return total / d.n if not isinstance(total, int) else Fraction(total, d.n)
    if y_side is None:
        raise TypeError("pass two setting sets or one ProductDistribution")
    if x_side.n != y_side.n:
        raise ValueError(f"string lengths differ: {x_side.n} vs {y_side.n}")
    return inner_density(gamma(x_side), gamma(y_side))


def objective_value(d: ProductDistribution) -> float:
    return float(max(d.p_x.values()) * max(d.p_y.values())) ** (1.0 / d.n)


def set_objective(s_x: SettingSet, s_y: SettingSet) -> float:
    """(|S_X| |S_Y|)^(-1/n), the randomness of uniform settings on the sets."""
    return 2.0 ** (-(math.log2(s_x.size) + math.log2(s_y.size)) / s_x.n)


def _flip_and_sort(s: SettingSet, decreasing: bool) -> SettingSet:
    n, k = s.n, s.size
    flip = 0
    cols = []
    for i, col in enumerate(s.column_sums):
        if 2 * col > k:
            flip |= 1 << (n - 1 - i)
            cols.append(k - col)
        else:
            cols.append(col)
    order = sorted(range(n), key=lambda i: (-cols[i] if decreasing else cols[i], i))
    out = []
    for code in s.members:
        code ^= flip
        new = 0
        for j, src in enumerate(order):
            new |= column_bit(code, n, src) << (n - 1 - j)
        out.append(new)
    return SettingSet(n, out)


def canonicalize(s_x: SettingSet, s_y: SettingSet) -> tuple[SettingSet, SettingSet]:
    """Flip heavy columns and reorder so the X profile decreases and the Y
    profile increases, all entries at most 1/2. Sizes are preserved and the
    density never grows.
    """
    if s_x.size == 0 or s_y.size == 0:
        raise ValueError("canonicalize needs nonempty sets")
    if s_x.n != s_y.n:
        raise ValueError("sets must share the string length")
    return _flip_and_sort(s_x, True), _flip_and_sort(s_y, False)


@dataclass
class SolveResult:
    n: int
    c: Fraction
    value: float
    witness_x: Union[SettingSet, ProductDistribution, None]
    witness_y: Union[SettingSet, ProductDistribution, None]
    constraint_value: Fraction
    bracket_low: float
    bracket_high: float
    exhaustive: bool
    extra: dict = field(default_factory=dict)

    def witness_sizes(self) -> tuple[int, int]:
        sx = _support_size(self.witness_x, "x")
        sy = _support_size(self.witness_y, "y")
        return sx, sy

    def to_record(self) -> dict:
        rec = {
            "n": self.n,
            "c": level_text(self.c),
            "value": self.value,
            "bracket_low": self.bracket_low,
            "bracket_high": self.bracket_high,
            "constraint": str(self.constraint_value),
            "constraint_float": float(self.constraint_value),
            "exhaustive": self.exhaustive,
            "witness_x": _witness_record(self.witness_x, "x"),
            "witness_y": _witness_record(self.witness_y, "y"),
        }
        rec.update(self.extra)
        return rec

    def csv_row(self) -> dict:
        sx, sy = self.witness_sizes()
        return {
            "n": self.n,
            "c": level_text(self.c),
            "value": repr(self.value),
            "bracket_low": repr(self.bracket_low),
            "bracket_high": repr(self.bracket_high),
            "constraint": str(self.constraint_value),
            "witness_size_x": sx,
            "witness_size_y": sy,
            "exhaustive": self.exhaustive,
        }


SOLVE_CSV_COLUMNS = [
    "n", "c", "value", "bracket_low", "bracket_high", "constraint",
    "witness_size_x", "witness_size_y", "exhaustive",
]


def _support_size(w, side: str) -> int:
    if w is None:
        return 0
    if isinstance(w, SettingSet):
        return w.size
    p = w.p_x if side == "x" else w.p_y
    return sum(1 for v in p.values() if v > 0)


def _witness_record(w, side: str):
    if w is None:
        return None
    if isinstance(w, SettingSet):
        return w.strings()
    p = w.p_x if side == "x" else w.p_y
    return {bits_of(k, w.n): str(v) for k, v in sorted(p.items()) if v > 0}


@lru_cache(maxsize=None)
def _canonical_signatures(n: int, decreasing: bool):
    """One representative per (size, column sums) among canonical sets.

    Returns arrays sorted by size descending plus each group's
    lexicographically least mask and its rank in key order.
    """
    table = kernels.subset_table(n)
    sizes, cols = table.sizes, table.cols
    ok = (sizes > 0) & (2 * cols <= sizes[:, None]).all(axis=1)
    if n > 1:
        steps = np.diff(cols, axis=1)
        ok &= (steps <= 0).all(axis=1) if decreasing else (steps >= 0).all(axis=1)
    groups: dict[tuple, tuple] = {}
    for mask in np.nonzero(ok)[0]:
        mask = int(mask)
        sig = (int(sizes[mask]),) + tuple(int(v) for v in cols[mask])
        key = kernels.mask_key(mask)
        cur = groups.get(sig)
        if cur is None or key < cur[0]:
            groups[sig] = (key, mask)
    sigs = list(groups)
    by_key = sorted(range(len(sigs)), key=lambda i: groups[sigs[i]][0])
    rank = {sigs[i]: r for r, i in enumerate(by_key)}
    sigs.sort(key=lambda s: (-s[0], rank[s]))
    k = np.array([s[0] for s in sigs], dtype=np.int64)
    c = np.array([s[1:] for s in sigs], dtype=np.int64).reshape(len(sigs), n)
    r = np.array([rank[s] for s in sigs], dtype=np.int64)
    masks = [groups[s][1] for s in sigs]
    return k, c, r, masks


MAX_DEFAULT_EXACT_N = 3


def solve_uniform_exact(n: int, c, allow_n4: bool = False) -> SolveResult:
    """Exact optimum of the uniform-support problem by exhaustive search.

    Only canonical pairs (X profile decreasing, Y increasing, entries <= 1/2)
    are scanned; some optimum is always of this form. The witness is the
    lexicographically least optimal canonical pair.
    """
    c = parse_level(c)
    limit = 4 if allow_n4 else MAX_DEFAULT_EXACT_N
    if not 1 <= n <= limit:
        raise DomainError(f"exhaustive search supports 1 <= n <= {limit} (n = 4 needs allow_n4)")
    kx, cx, rx, mx = _canonical_signatures(n, True)
    ky, cy, ry, my = _canonical_signatures(n, False)
    top = 1 << (2 * n)
    thresh = np.array([math.floor(c * n * p) for p in range(top + 1)], dtype=np.int64)
    best, i, j = kernels.best_pair(kx, cx, rx, ky, cy, ry, thresh)
    if best < 0:
        raise AssertionError("the all-zeros pair is always feasible")
    s_x = SettingSet(n, kernels.mask_members(mx[i]))
    s_y = SettingSet(n, kernels.mask_members(my[j]))
    value = best ** (-1.0 / n)
    return SolveResult(
        n=n,
        c=c,
        value=value,
        witness_x=s_x,
        witness_y=s_y,
        constraint_value=constraint_density(s_x, s_y),
        bracket_low=value,
        bracket_high=value,
        exhaustive=True,
        extra={"product_size": best},
    )


def lp_extreme_point(theta: Mapping[int, float], cap: Mass) -> dict[int, Mass]:
    """Minimise sum p(x) theta(x) over distributions with every mass <= cap.

    The optimum fills the floor(1/cap) smallest-theta strings to the cap
    (ties broken by string order) and puts the remainder on the next one.
    Exact when ``cap`` is a Fraction.
    """
    exact = isinstance(cap, Fraction)
    if not 0 < cap < 1:
        raise DomainError(f"cap must lie in (0, 1), got {cap}")
    order = sorted(theta, key=lambda x: (theta[x], x))
    k = math.floor(1 / cap)
    rem = 1 - k * cap
    if not exact and rem <= 1e-15:
        # 1/cap is an integer up to rounding
        rem = 0.0
        cap = 1.0 / k
    needed = k + (1 if rem > 0 else 0)
    if needed > len(order):
        raise InfeasibleError(f"cap {cap} too small for {len(order)} strings")
    p = {x: cap for x in order[:k]}
    if rem > 0:
        p[order[k]] = rem
    return p


def uniformize(p_star: Mapping[int, Mass], theta: Mapping[int, float]) -> dict[int, Mass]:
    """Drop the remainder atom of an extreme point and spread uniformly.

    The weighted theta sum does not increase, and the largest mass grows by
    at most a factor 3.
    """
    support = {x: v for x, v in p_star.items() if v > 0}
    if not support:
        raise ValueError("empty distribution")
    cap = max(support.values())
    exact = all(isinstance(v, Fraction) for v in support.values())
    full = [x for x, v in support.items() if v == cap]
    partial = [x for x, v in support.items() if v != cap]
    if len(partial) > 1:
        raise ValueError("not an extreme point: more than one atom below the cap")
    if not partial:
        return dict(support)
    z = partial[0]
    if any(theta[x] > theta[z] for x in full):
        raise ValueError("remainder atom must carry the largest theta")
    mass = Fraction(1, len(full)) if exact else 1.0 / len(full)
    return {x: mass for x in full}


def _best_response(p_other: Mapping[int, float], n: int, budget: float) -> dict[int, float]:
    """Smallest-cap distribution meeting sum p theta <= budget against p_other."""
    mu = [float(v) for v in _column_means(p_other, n)]
    theta = {x: sum(mu[i] for i in range(n) if column_bit(x, n, i)) for x in range(1 << n)}

    def value(cap):
        return sum(v * theta[x] for x, v in lp_extreme_point(theta, cap).items())

    lo = 1.0 / (1 << n)
    if value(lo) <= budget:
        return {x: lo for x in theta}
    hi = 1.0 - 1e-16
    if value(hi) > budget:
        return {min(theta, key=lambda x: (theta[x], x)): 1.0}
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if value(mid) <= budget:
            hi = mid
        else:
            lo = mid
    return lp_extreme_point(theta, hi)


def alternating_heuristic(n: int, c, start_x: Mapping[int, float], start_y: Mapping[int, float],
                          rounds: int = 50) -> tuple[float, dict, dict]:
    """Alternate best responses of X and Y; returns the best feasible point seen."""
    budget = float(as_fraction(c)) * n
    p_x = {k: float(v) for k, v in start_x.items()}
    p_y = {k: float(v) for k, v in start_y.items()}
    best = (math.inf, p_x, p_y)
    for _ in range(rounds):
        improved = False
        for side in ("x", "y"):
            if side == "x":
                p_x = _best_response(p_y, n, budget)
            else:
                p_y = _best_response(p_x, n, budget)
            obj = (max(p_x.values()) * max(p_y.values())) ** (1.0 / n)
            if obj < best[0] - 1e-15:
                best = (obj, p_x, p_y)
                improved = True
        if not improved:
            break
    return best


def bracket_P_n(n: int, c, rounds: int = 50) -> SolveResult:
    """Bracket the distribution-problem optimum.

    The upper end is the best known uniform-support value (exact for n <= 3,
    threshold construction otherwise); the lower end divides it by 3^(2/n).
    An alternating best-response heuristic supplies a feasible point whose
    value lies in the bracket.
    """
    c = parse_level(c)
    if n <= MAX_DEFAULT_EXACT_N:
        base = solve_uniform_exact(n, c)
        upper, s_x, s_y = base.value, base.witness_x, base.witness_y
        source = "exhaustive"
    else:
        rep = threshold_construct(n, c)
        upper = rep.best_objective
        s_x = s_y = SettingSet.threshold(n, rep.best_l) if n <= HEURISTIC_MAX_N else None
        source = "threshold"
    low = 3.0 ** (-2.0 / n) * upper
    extra = {"upper_source": source, "heuristic_value": None}
    value = upper
    witness = None
    constraint = Fraction(0)
    if n <= HEURISTIC_MAX_N:
        uniform = {x: 1.0 / (1 << n) for x in range(1 << n)}
        starts = [
            ({x: 1.0 / s_x.size for x in s_x.members}, {y: 1.0 / s_y.size for y in s_y.members}),
            ({0: 1.0}, uniform),
        ]
        best = None
        for sx, sy in starts:
            cand = alternating_heuristic(n, c, sx, sy, rounds)
            if best is None or cand[0] < best[0]:
                best = cand
        value, px, py = best
        witness = ProductDistribution(n, px, py)
        constraint = Fraction(float(constraint_density(witness)))
        extra["heuristic_value"] = value
    return SolveResult(
        n=n,
        c=c,
        value=value,
        witness_x=witness,
        witness_y=witness,
        constraint_value=constraint,
        bracket_low=low,
        bracket_high=upper,
        exhaustive=False,
        extra=extra,
    )


@dataclass
class ThresholdReport:
    n: int
    c: Fraction
    l: int
    size: int
    size_log2: float
    constraint: Fraction
    objective: float
    limit: float
    best_l: int
    best_objective: float
    best_constraint: Fraction

    @property
    def gap_to_limit(self) -> float:
        return self.objective - self.limit

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "c": level_text(self.c),
            "l": self.l,
            "size_log2": self.size_log2,
            "constraint": str(self.constraint),
            "constraint_float": float(self.constraint),
            "objective": self.objective,
            "objective_minus_limit": self.gap_to_limit,
            "best_l": self.best_l,
            "best_objective": self.best_objective,
            "best_constraint": str(self.best_constraint),
        }


def _threshold_stats(n: int, l: int) -> tuple[int, int]:
    """(|A_{n,l}|, total number of ones over A_{n,l}) with exact integers."""
    size = ones = 0
    b = 1
    for i in range(0, min(l, n) + 1):
        if i:
            b = b * (n - i + 1) // i
        size += b
        ones += i * b
    return size, ones


def _threshold_constraint(n: int, l: int) -> tuple[int, Fraction]:
    size, ones = _threshold_stats(n, l)
    mean = Fraction(ones, n * size)
    return size, mean * mean


def _threshold_objective(n: int, size: int) -> tuple[float, float]:
    lg = math.log2(size)
    return lg, 2.0 ** (-2.0 * lg / n)


def threshold_construct(n: int, c, l: int | None = None) -> ThresholdReport:
    """Both sides uniform on the strings with at most l ones.

    Without ``l`` the construction uses l = floor(n sqrt c); ``best_l`` is the
    largest l still meeting the density constraint.
    """
    if n < 1:
        raise DomainError("n must be positive")
    c = parse_level(c)
    if l is None:
        # floor(n sqrt c) = largest l with l^2 <= n^2 c
        l = math.isqrt((n * n * c.numerator) // c.denominator)
    elif l < 0:
        raise DomainError("l must be nonnegative")
    size, constraint = _threshold_constraint(n, l)
    if constraint > c:
        raise InfeasibleError(f"A_({n},{l}) has density {float(constraint):.6g} > c")
    lg, obj = _threshold_objective(n, size)
    best_l, best_size, best_con = l, size, constraint
    while best_l < n:
        s2, c2 = _threshold_constraint(n, best_l + 1)
        if c2 > c:
            break
        best_l, best_size, best_con = best_l + 1, s2, c2
    return ThresholdReport(
        n=n,
        c=c,
        l=l,
        size=size,
        size_log2=lg,
        constraint=constraint,
        objective=obj,
        limit=independent_bound(float(c)),
        best_l=best_l,
        best_objective=_threshold_objective(n, best_size)[1],
        best_constraint=best_con,
    )


@dataclass
class CertificateReport:
    n: int
    m: int
    c: Fraction
    constraint: Fraction
    a: Profile
    b: Profile
    a_bar: Profile
    b_bar: Profile
    gap: Fraction
    gap_ok: bool
    entropy_sum: float
    exact_exponent: float
    relaxed_level: Fraction
    f_at_relaxed: float | None
    envelope_ok: bool | None
    certified_size_bound_log2: float
    size_log2: float

    @property
    def sound(self) -> bool:
        return self.certified_size_bound_log2 >= self.size_log2

    @property
    def objective_floor(self) -> float:
        """Lower bound on (|S_X||S_Y|)^(-1/n) implied by the certificate."""
        return 2.0 ** (-self.certified_size_bound_log2 / self.n)

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "c": level_text(self.c),
            "constraint": str(self.constraint),
            "a_bar": [str(v) for v in self.a_bar],
            "b_bar": [str(v) for v in self.b_bar],
            "gap": str(self.gap),
            "gap_ok": self.gap_ok,
            "entropy_sum": self.entropy_sum,
            "exact_exponent": self.exact_exponent,
            "relaxed_level": str(self.relaxed_level),
            "f_at_relaxed": self.f_at_relaxed,
            "envelope_ok": self.envelope_ok,
            "certified_size_bound_log2": self.certified_size_bound_log2,
            "size_log2": self.size_log2,
            "objective_floor": self.objective_floor,
            "sound": self.sound,
        }


def _clip_half(p: Profile) -> Profile:
    half = Fraction(1, 2)
    return Profile(min(v, half) for v in p)


def converse_certificate(s_x: SettingSet, s_y: SettingSet, m: int, c) -> CertificateReport:
    """Finite-n upper bound on log2(|S_X||S_Y|) for a feasible pair.

    Pipeline: canonicalize, round the profiles up onto an m-grid, bound each
    set size by the entropy of its rounded profile, and compare the average
    entropy against f at the relaxed level c + 2/m when that level reaches
    c_Q. Rounded entries are clipped at 1/2 (only matters for odd m) so the
    entropy bound stays valid.
    """
    c = parse_level(c)
    if m < 2:
        raise DomainError("grid size m must be at least 2")
    if s_x.size == 0 or s_y.size == 0:
        raise ValueError("certificate needs nonempty sets")
    if s_x.n != s_y.n:
        raise ValueError("sets must share the string length")
    n = s_x.n
    constraint = constraint_density(s_x, s_y)
    if constraint > c:
        raise InfeasibleError(f"density {float(constraint):.6g} exceeds c = {float(c):.6g}")
    cx, cy = canonicalize(s_x, s_y)
    a, b = gamma(cx), gamma(cy)
    a_bar = _clip_half(discretize(a, m, "upper", "decreasing"))
    b_bar = _clip_half(discretize(b, m, "upper", "increasing"))
    coarse = sum((x * y for x, y in zip(a_bar, b_bar)), Fraction(0)) / m
    gap = coarse - inner_density(a, b)
    ha = [binary_entropy(float(v)) for v in a_bar]
    hb = [binary_entropy(float(v)) for v in b_bar]
    entropy_sum = sum(x + y for x, y in zip(ha, hb)) / m
    exponent = 0.0
    prev = 0
    for k in range(1, m + 1):
        lk = k * n // m
        exponent += (lk - prev) * (ha[k - 1] + hb[k - 1])
        prev = lk
    relaxed = c + Fraction(2, m)
    if relaxed >= C_Q_EXACT:
        f_rel = f_value(float(min(relaxed, Fraction(1, 4))))
        env_ok = entropy_sum <= f_rel + 1e-9
    else:
        f_rel = env_ok = None
    return CertificateReport(
        n=n,
        m=m,
        c=c,
        constraint=constraint,
        a=a,
        b=b,
        a_bar=a_bar,
        b_bar=b_bar,
        gap=gap,
        gap_ok=gap < Fraction(2, m),
        entropy_sum=entropy_sum,
        exact_exponent=exponent,
        relaxed_level=relaxed,
        f_at_relaxed=f_rel,
        envelope_ok=env_ok,
        certified_size_bound_log2=exponent,
        size_log2=math.log2(s_x.size) + math.log2(s_y.size),
    )


EXPLICIT_MAX_N = 20


def explicit_feasible_point(n: int, c) -> tuple[ProductDistribution, float]:
    """Feasible point with objective (1/2)(1-2c)^(1/n) < 1/2.

    X puts 1-2c on the all-zeros string and spreads 2c over the rest; Y is
    uniform.
    """
    c = parse_level(c)
    if not 1 <= n <= EXPLICIT_MAX_N:
        raise DomainError(f"explicit construction limited to 1 <= n <= {EXPLICIT_MAX_N}")
    rest = 2 * c / ((1 << n) - 1)
    p_x = {0: 1 - 2 * c}
    p_x.update({x: rest for x in range(1, 1 << n)})
    p_y = {y: Fraction(1, 1 << n) for y in range(1 << n)}
    d = ProductDistribution(n, p_x, p_y)
    return d, objective_value(d)
