"""Seeded property suites behind ``chshrand verify``.

Each check draws its random inputs from its own Philox stream, keyed by the
suite seed and the check name, so a check's outcome does not depend on which
other checks ran before it. Margins are reported as worst-case slack:
nonnegative (or strictly positive where the property is strict) means pass.
"""
from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import coremath as cm
from . import lhvm
from . import solver
from .profile import (
    Profile,
    SettingSet,
    discretization_gap,
    discretize,
    gamma,
    inner_density,
    profile_leq,
    volume_entropy_bound,
    volume_exact,
)

SUITES = ("lemmas", "profiles", "solver", "lhvm")


@dataclass
class PropertyResult:
    suite: str
    name: str
    anchor: str
    samples: int
    worst_margin: float
    passed: bool

    def to_record(self) -> dict:
        return {
            "suite": self.suite,
            "name": self.name,
            "anchor": self.anchor,
            "samples": self.samples,
            "worst_margin": self.worst_margin,
            "passed": self.passed,
        }


VERIFY_CSV_COLUMNS = ["suite", "name", "anchor", "samples", "worst_margin", "passed"]


def _rng(seed: int, name: str) -> np.random.Generator:
    tag = zlib.crc32(name.encode())
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, tag])))


def _count(samples: int | None, base: int) -> int:
    return base if samples is None else max(1, int(samples))


def _rand_profile(rng, m: int, den: int = 60, top: int = 30, order: str | None = None) -> Profile:
    vals = [Fraction(int(v), den) for v in rng.integers(0, top + 1, size=m)]
    if order == "decreasing":
        vals.sort(reverse=True)
    elif order == "increasing":
        vals.sort()
    return Profile(vals)


def _rand_set(rng, n: int) -> SettingSet:
    while True:
        mask = rng.random(1 << n) < rng.uniform(0.1, 0.9)
        if mask.any():
            return SettingSet(n, np.nonzero(mask)[0].tolist())


def _feasible_pair(rng, n: int, c: Fraction) -> tuple[SettingSet, SettingSet]:
    while True:
        sx, sy = _rand_set(rng, n), _rand_set(rng, n)
        if solver.constraint_density(sx, sy) <= c:
            return sx, sy


# ---------------------------------------------------------------- lemmas

def check_entropy_range(rng, samples):
    k = _count(samples, 10_000)
    worst = math.inf
    for t in rng.random(k):
        h = cm.binary_entropy(float(t))
        sym = abs(h - cm.binary_entropy(1.0 - float(t)))
        worst = min(worst, h, 1.0 - h, 1e-12 - sym)
    return k, worst, worst >= 0


def check_closed_form(rng, samples):
    grid = np.linspace(cm.CLOSED_FORM_START, 0.25, 200)
    worst = min(1e-6 - abs(cm.f_value(float(t)) - cm.f0(float(t))) for t in grid)
    return 200, worst, worst >= 0


def check_envelope(rng, samples):
    grid = np.linspace(0.0, 0.25, 500)
    worst = min(cm.concave_envelope_g(float(t)) - cm.f_value(float(t)) + 1e-9 for t in grid)
    return 500, worst, worst >= 0


def check_f_increasing(rng, samples):
    vals = [cm.f_value(float(t)) for t in np.linspace(0.0, 0.25, 500)]
    worst = min(b - a + 1e-9 for a, b in zip(vals, vals[1:]))
    return 499, worst, worst >= 0


def check_average_of_f(rng, samples):
    k = _count(samples, 1000)
    worst = math.inf
    for _ in range(k):
        size = int(rng.integers(1, 9))
        level = float(rng.uniform(cm.C_Q, 0.25))
        ts = rng.uniform(0.0, 0.25, size)
        mean = float(ts.mean())
        if mean > level:
            ts = ts * (level / mean)
        avg = sum(cm.f_value(float(t)) for t in ts) / size
        worst = min(worst, cm.f_value(level) - avg + 1e-9)
    return k, worst, worst >= 0


def check_ceil_reciprocal(rng, samples):
    k = _count(samples, 10_000)
    worst = None
    dens = rng.integers(2, 10_000, size=k)
    for q in dens:
        q = int(q)
        p = int(rng.integers(1, q))
        margin = cm.ceil_reciprocal_margin(Fraction(p, q))
        worst = margin if worst is None else min(worst, margin)
    return k, float(worst), worst >= 0


def check_midpoint_concavity(rng, samples):
    defect = cm.midpoint_concavity_probe(cm.CLOSED_FORM_START, 0.25, 101)
    return 101, 1e-9 - defect, defect <= 1e-9


def check_discretization_gap(rng, samples):
    k = _count(samples, 500)
    worst = math.inf
    for _ in range(k):
        n = int(rng.integers(1, 13))
        m = int(rng.integers(2, 17))
        a = _rand_profile(rng, n, order="decreasing")
        b = _rand_profile(rng, n, order="increasing")
        worst = min(worst, float(Fraction(2, m) - discretization_gap(a, b, m)))
    return k, worst, worst > 0


# ---------------------------------------------------------------- profiles

def check_sandwich(rng, samples):
    k = _count(samples, 500)
    ok = True
    for _ in range(k):
        order = "decreasing" if rng.random() < 0.5 else "increasing"
        a = _rand_profile(rng, int(rng.integers(1, 13)), top=60, order=order)
        m = int(rng.integers(2, 17))
        lo = discretize(a, m, "lower", order)
        hi = discretize(a, m, "upper", order)
        ok &= profile_leq(lo, a) and profile_leq(a, hi)
    return k, 0.0 if ok else -1.0, ok


def check_inner_density(rng, samples):
    k = _count(samples, 500)
    worst = Fraction(0)
    for _ in range(k):
        n = int(rng.integers(1, 13))
        a, b = _rand_profile(rng, n, top=60), _rand_profile(rng, n, top=60)
        direct = sum((x * y for x, y in zip(a, b)), Fraction(0)) / n
        worst = max(worst, abs(inner_density(a, b) - direct))
    return k, 0.0 - float(worst), worst == 0


def _dominated_pair(rng, n):
    p = _rand_profile(rng, n, den=10, top=10)
    q = Profile(min(Fraction(1), v + Fraction(int(rng.integers(0, 4)), 10)) for v in p)
    return p, q


def check_volume_monotone(rng, samples):
    k = _count(samples, 200)
    worst = math.inf
    for _ in range(k):
        n = int(rng.integers(1, 4))
        p, q = _dominated_pair(rng, n)
        worst = min(worst, volume_exact(q, n)[0] - volume_exact(p, n)[0])
    return k, float(worst), worst >= 0


def check_entropy_volume(rng, samples):
    grid = [Fraction(i, 10) for i in range(6)]
    worst = math.inf
    count = 0
    for vals in itertools.product(grid, repeat=3):
        a = Profile(vals)
        size, _ = volume_exact(a, 3)
        worst = min(worst, volume_entropy_bound(a, 3) + 1e-12 - math.log2(size))
        count += 1
    return count, worst, worst >= 0


def check_gamma_volume(rng, samples):
    from . import kernels

    worst = math.inf
    for mask in range(1, 1 << 8):
        s = SettingSet(3, kernels.mask_members(mask))
        g = gamma(s)
        if not profile_leq(g, g):
            return 255, -1.0, False
        worst = min(worst, volume_exact(g, 3)[0] - s.size)
    return 255, float(worst), worst >= 0


def check_volume_example(rng, samples):
    size, _ = volume_exact(Profile([Fraction(2, 5)] * 3), 3)
    return 1, float(-abs(size - 5)), size == 5


# ---------------------------------------------------------------- solver

def check_canonicalize(rng, samples):
    k = _count(samples, 300)
    ok = True
    worst = Fraction(1)
    for _ in range(k):
        n = int(rng.integers(1, 7))
        sx, sy = _rand_set(rng, n), _rand_set(rng, n)
        cx, cy = solver.canonicalize(sx, sy)
        a, b = gamma(cx), gamma(cy)
        ok &= cx.size == sx.size and cy.size == sy.size
        ok &= a.is_decreasing() and b.is_increasing() and a.bounded and b.bounded
        slack = solver.constraint_density(sx, sy) - solver.constraint_density(cx, cy)
        worst = min(worst, slack)
    return k, float(worst), ok and worst >= 0


def brute_force_uniform(n: int, c) -> tuple[int, tuple[SettingSet, SettingSet]]:
    """Largest |S_X||S_Y| over all nonempty pairs meeting the constraint.

    No symmetry reduction; exact rational densities. Intended for n <= 2.
    """
    c = solver.parse_level(c)
    subsets = []
    for mask in range(1, 1 << (1 << n)):
        subsets.append(SettingSet(n, [x for x in range(1 << n) if mask >> x & 1]))
    best, arg = 0, None
    for sx in subsets:
        for sy in subsets:
            p = sx.size * sy.size
            if p < best:
                continue
            if solver.constraint_density(sx, sy) > c:
                continue
            key = (sx.members, sy.members)
            if p > best or key < (arg[0].members, arg[1].members):
                best, arg = p, (sx, sy)
    return best, arg


def check_pruned_vs_brute(rng, samples):
    worst = 0.0
    count = 0
    for n in (1, 2):
        for c in ("0.05", cm.C_Q_LITERAL, "0.2", "0.25"):
            fast = solver.solve_uniform_exact(n, c)
            best, _ = brute_force_uniform(n, c)
            worst = max(worst, abs(fast.value - best ** (-1.0 / n)))
            count += 1
    return count, 0.0 - worst, worst == 0


def check_bracket(rng, samples):
    worst = math.inf
    for n in (1, 2, 3):
        r = solver.bracket_P_n(n, cm.C_Q_LITERAL)
        worst = min(worst, r.value - r.bracket_low, r.bracket_high - r.value + 1e-12)
    return 3, worst, worst >= 0


def check_threshold_floor(rng, samples):
    top = 512
    worst = min(
        solver.threshold_construct(n, cm.C_Q_LITERAL).objective - (0.26428 - 1e-6)
        for n in range(1, top + 1)
    )
    return top, worst, worst >= 0


def check_certificate(rng, samples):
    k = _count(samples, 100)
    worst = math.inf
    env_worst = math.inf
    count = 0
    for _ in range(k):
        n = int(rng.integers(1, 7))
        sx, sy = _feasible_pair(rng, n, Fraction(1, 4))
        for m in (2, 4, 8):
            rep = solver.converse_certificate(sx, sy, m, Fraction(1, 4))
            worst = min(worst, rep.certified_size_bound_log2 - rep.size_log2)
            if rep.f_at_relaxed is not None:
                env_worst = min(env_worst, rep.f_at_relaxed + 1e-9 - rep.entropy_sum)
            count += 1
    return count, min(worst, env_worst), worst >= 0 and env_worst >= 0


def check_reduction(rng, samples):
    k = _count(samples, 200)
    worst = math.inf
    for _ in range(k):
        n = int(rng.integers(1, 6))
        theta = {x: float(rng.random()) for x in range(1 << n)}
        cap = float(rng.uniform(1.0 / (1 << n), 0.99))
        p = solver.lp_extreme_point(theta, cap)
        u = solver.uniformize(p, theta)
        w_p = sum(v * theta[x] for x, v in p.items())
        w_u = sum(v * theta[x] for x, v in u.items())
        worst = min(worst, 3 * cap - max(u.values()), w_p - w_u + 1e-12)
    return k, worst, worst >= 0


# ---------------------------------------------------------------- lhvm

def _rand_q(rng, exact: bool = True):
    raw = [int(v) for v in rng.integers(0, 20, size=4)]
    if sum(raw) == 0:
        raw[0] = 1
    total = sum(raw)
    return {p: Fraction(r, total) for p, r in zip(lhvm.PAIRS, raw)}


def check_classical_bound(rng, samples):
    k = _count(samples, 500)
    worst = math.inf
    for _ in range(k):
        settings = lhvm.JointSettings({p: Fraction(1, 4) for p in lhvm.PAIRS})
        size = int(rng.integers(1, 5))
        raw = [int(v) + 1 for v in rng.integers(0, 10, size=size)]
        lambdas = [
            lhvm.LambdaComponent(
                Fraction(r, sum(raw)), settings,
                lhvm.OutputFunctions(*(int(b) for b in rng.integers(0, 2, size=4))),
            )
            for r in raw
        ]
        s = lhvm.chsh_value(lhvm.LhvmStrategy(1, lambdas))
        worst = min(worst, 2 + 1e-12 - float(s))
    return k, worst, worst >= 0


def check_lift(rng, samples):
    k = _count(samples, 200)
    ok = True
    for _ in range(k):
        q = _rand_q(rng)
        lifted = lhvm.uniform_marginal_lift(q)
        marg = lhvm.setting_marginal(lifted)
        ok &= all(marg[p] == Fraction(1, 4) for p in lhvm.PAIRS)
        ok &= lhvm.randomness_measure(lifted) == float(max(q.values()))
        ok &= lhvm.chsh_value(lifted) == 4 * (q[(0, 0)] + q[(0, 1)] + q[(1, 0)] - q[(1, 1)])
    return k, 0.0 if ok else -1.0, ok


def check_set_consistency(rng, samples):
    k = _count(samples, 200)
    worst = Fraction(0)
    for _ in range(k):
        n = int(rng.integers(1, 6))
        sx, sy = _rand_set(rng, n), _rand_set(rng, n)
        st = lhvm.strategy_from_sets(sx, sy)
        diff = lhvm.chsh_value(st) - (4 - 8 * solver.constraint_density(sx, sy))
        worst = max(worst, abs(diff))
    return k, 0.0 - float(worst), worst == 0


def check_ranges(rng, samples):
    k = _count(samples, 200)
    worst = math.inf
    for _ in range(k):
        n = int(rng.integers(1, 5))
        st = lhvm.strategy_from_sets(_rand_set(rng, n), _rand_set(rng, n))
        s = float(lhvm.chsh_value(st))
        p = lhvm.randomness_measure(st)
        worst = min(worst, 4 - abs(s), p - 0.25 + 1e-12, 1 - p + 1e-12)
    return k, worst, worst >= 0


def check_monte_carlo_rate(rng, samples):
    base = 50_000
    st = lhvm.free_will_strategy(1)
    seed = int(rng.integers(0, 2**31))
    se1 = lhvm.simulate_runs(st, base, seed).standard_error
    se4 = lhvm.simulate_runs(st, 4 * base, seed + 1).standard_error
    ratio = se1 / se4
    return 2, 0.2 - abs(ratio / 2 - 1), abs(ratio / 2 - 1) <= 0.2


Check = Callable[[np.random.Generator, "int | None"], tuple]

CHECKS: dict[str, list[tuple[str, str, Check]]] = {
    "lemmas": [
        ("entropy range and symmetry", "binary entropy", check_entropy_range),
        ("closed form above 1/16", "f(t) = 2 h(sqrt t) on [1/16, 1/4]", check_closed_form),
        ("envelope dominates f", "g >= f", check_envelope),
        ("f increasing", "f monotone on [0, 1/4]", check_f_increasing),
        ("average of f below f of level", "(1/k) sum f(t_i) <= f(c')", check_average_of_f),
        ("ceil reciprocal bound", "x (ceil(1/x) - 1) >= 1/3", check_ceil_reciprocal),
        ("midpoint concavity above 1/16", "f concave on [1/16, 1/4]", check_midpoint_concavity),
        ("discretization gap below 2/m", "coarse density - density < 2/m", check_discretization_gap),
    ],
    "profiles": [
        ("discretization sandwich", "lower <= a <= upper", check_sandwich),
        ("inner density equals dot product", "integral f_a f_b = a.b / n", check_inner_density),
        ("volume monotone", "p <= q implies V(p) <= V(q)", check_volume_monotone),
        ("entropy volume bound n=3", "log2 V_n(a) <= sum (l_k - l_k-1) h(a_k)", check_entropy_volume),
        ("gamma volume compatibility", "V_3(gamma(S)) >= |S|", check_gamma_volume),
        ("volume of (0.4,0.4,0.4) at n=3", "V_3 = 5", check_volume_example),
    ],
    "solver": [
        ("canonicalize safety", "flip and sort never raise the density", check_canonicalize),
        ("pruned equals brute force", "canonical search is exact for n <= 2", check_pruned_vs_brute),
        ("heuristic inside bracket", "[3^(-2/n) U, U]", check_bracket),
        ("threshold floor", "threshold objective >= limit", check_threshold_floor),
        ("certificate soundness", "log2 |S_X||S_Y| <= certified exponent", check_certificate),
        ("uniformize contract", "max mass <= 3 cap, no larger weight", check_reduction),
    ],
    "lhvm": [
        ("classical bound", "free-will S <= 2", check_classical_bound),
        ("uniform marginal lift", "marginal 1/4, P and S preserved", check_lift),
        ("sets to strategy", "S = 4 - 8 density", check_set_consistency),
        ("value ranges", "|S| <= 4, 1/4 <= P <= 1", check_ranges),
        ("monte carlo rate", "4x tests halves the standard error", check_monte_carlo_rate),
    ],
}


def run_suite(suite: str, seed: int = 0, samples: int | None = None) -> list[PropertyResult]:
    """Run one suite (or 'all').

    ``samples`` overrides the draw count of every randomised check; grid
    checks and exhaustive checks keep their fixed size.
    """
    names = SUITES if suite == "all" else (suite,)
    for s in names:
        if s not in CHECKS:
            raise ValueError(f"unknown suite {suite!r}")
    out = []
    for s in names:
        for name, anchor, fn in CHECKS[s]:
            drawn, margin, passed = fn(_rng(seed, name), samples)
            out.append(PropertyResult(s, name, anchor, int(drawn), float(margin), bool(passed)))
    return out
