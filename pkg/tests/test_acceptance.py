"""End-to-end acceptance checks.

Each test prints one PASS/FAIL line with the measured values, the target and
the elapsed time, then asserts. The lines are repeated in the pytest summary
and printed when the file is run directly with python3.
"""
from __future__ import annotations

import io
import json
import math
import time
from contextlib import redirect_stdout
from fractions import Fraction as F

import numpy as np
import pytest

from chshrand import cli, coremath as cm, lhvm, solver, verify
from chshrand.profile import Profile, SettingSet, volume_exact

ACCEPTANCE_LINES: list[str] = []


def report(label, ok, detail, elapsed, limit):
    ok = ok and elapsed < limit
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail} [{elapsed:.2f}s / limit {limit:g}s]"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def within(value, target, tol):
    return abs(value - target) <= tol


def cli_json(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli.main(argv)
    return code, json.loads(buf.getvalue())


def random_feasible_pairs(count, c, seed):
    """Seeded random set pairs with n <= 6, trimmed until the density meets c."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 8])))
    pairs = []
    while len(pairs) < count:
        n = int(rng.integers(1, 7))
        sides = []
        for _ in range(2):
            mask = rng.random(1 << n) < rng.uniform(0.05, 0.9)
            members = sorted(np.nonzero(mask)[0].tolist(), key=lambda x: (x.bit_count(), x)) or [0]
            sides.append(members)
        sx, sy = SettingSet(n, sides[0]), SettingSet(n, sides[1])
        while solver.constraint_density(sx, sy) > c:
            bigger = 0 if sx.size >= sy.size else 1
            sides[bigger] = sides[bigger][:-1] or [0]
            sx, sy = SettingSet(n, sides[0]), SettingSet(n, sides[1])
        pairs.append((sx, sy))
    return pairs


def test_headline_bound():
    t0 = time.perf_counter()
    code, rep = cli_json(["bound", "--c", "0.146446609406726"])
    el = time.perf_counter() - t0
    v = rep["independent"]
    ok = code == 0 and within(v, 0.26428, 5e-5)
    assert report("headline bound", ok, f"independent {v:.7f} vs 0.26428 ± 5e-5", el, 1)


def test_summary_table():
    t0 = time.perf_counter()
    code, rep = cli_json(["table1"])
    el = time.perf_counter() - t0
    cells = [
        ("single-run correlated", rep["n1_correlated"], 0.284518),
        ("single-run independent", rep["n1_independent"], 0.353553),
        ("asymptotic correlated", rep["asymptotic_correlated"], 0.258135),
        ("asymptotic independent", rep["asymptotic_independent"], 0.264280),
    ]
    parts = []
    ok = code == 0
    for name, got, want in cells:
        good = within(got, want, 1e-6)
        ok &= good
        parts.append(f"{name} {got:.7f} vs {want} ({'ok' if good else 'off by %.1e' % abs(got - want)})")
    assert report("summary table", ok, "; ".join(parts) + " ± 1e-6", el, 1)


def test_envelope_constants():
    t0 = time.perf_counter()
    f = cm.f_value(0.0625)
    g = cm.concave_envelope_g(0.0)
    el = time.perf_counter() - t0
    ok = within(f, 1.6226, 5e-4) and within(g, 1.6300, 5e-4) and f < g
    detail = f"f(1/16) {f:.6f} vs 1.6226 ± 5e-4, g(0) {g:.6f} vs 1.6300 ± 5e-4, f(1/16) < g(0) {f < g}"
    assert report("envelope constants", ok, detail, el, 1)


def test_closed_form_region():
    t0 = time.perf_counter()
    grid = np.linspace(0.0625, 0.25, 200)
    worst = max(abs(cm.f_value(float(t)) - 2 * cm.binary_entropy(math.sqrt(t))) for t in grid)
    el = time.perf_counter() - t0
    assert report("closed form on [1/16, 1/4]", worst <= 1e-6,
                  f"max |f - 2h(sqrt t)| = {worst:.2e} over 200 points (≤ 1e-6)", el, 5)


def test_exhaustive_small_n():
    t0 = time.perf_counter()
    r1 = solver.solve_uniform_exact(1, cm.C_Q_LITERAL)
    r1q = solver.solve_uniform_exact(1, "0.25")
    r2 = solver.solve_uniform_exact(2, cm.C_Q_LITERAL)
    brute = {(n, c): verify.brute_force_uniform(n, c)[0] for n, c in
             ((1, cm.C_Q_LITERAL), (1, "0.25"), (2, cm.C_Q_LITERAL))}
    el = time.perf_counter() - t0
    a21 = SettingSet.threshold(2, 1)
    checks = [
        ("P1'(cQ)", r1.value, 2 ** -0.5),
        ("P1'(1/4)", r1q.value, 0.5),
        ("P2'(cQ)", r2.value, 1 / 3),
    ]
    parts, ok = [], True
    for name, got, want in checks:
        good = math.isclose(got, want, rel_tol=1e-12)
        ok &= good
        parts.append(f"{name} {got:.6f} vs {want:.6f} ({'ok' if good else 'mismatch'})")
    wit = r2.witness_x == a21 and r2.witness_y == a21
    agree = (brute[(1, cm.C_Q_LITERAL)] == r1.extra["product_size"]
             and brute[(1, "0.25")] == r1q.extra["product_size"]
             and brute[(2, cm.C_Q_LITERAL)] == r2.extra["product_size"])
    ok &= wit and agree
    parts.append(f"n=2 witness A21 x A21 {wit}; brute force agrees {agree}")
    assert report("exhaustive small-n optima", ok, "; ".join(parts), el, 10)


def test_single_run_distribution():
    t0 = time.perf_counter()
    r = solver.bracket_P_n(1, cm.C_Q_LITERAL)
    el = time.perf_counter() - t0
    target = cm.S_Q / 8
    ok = within(r.value, target, 1e-9) and r.bracket_low <= r.value <= r.bracket_high
    detail = (f"heuristic {r.value:.12f} vs S_Q/8 = {target:.12f} ± 1e-9, "
              f"bracket [{r.bracket_low:.6f}, {r.bracket_high:.6f}]")
    assert report("single-run distribution optimum", ok, detail, el, 1)


def test_threshold_convergence():
    t0 = time.perf_counter()
    floor = 0.264280 - 1e-6
    worst_n, worst = None, math.inf
    for n in range(1, 2049):
        obj = solver.threshold_construct(n, cm.C_Q_LITERAL).objective
        if obj < worst:
            worst_n, worst = n, obj
    r8 = solver.threshold_construct(8, cm.C_Q_LITERAL).objective
    r1024 = solver.threshold_construct(1024, cm.C_Q_LITERAL).objective
    el = time.perf_counter() - t0
    ok_floor = worst >= floor
    ok8 = within(r8, 0.322024, 1e-6)
    ok1024 = abs(r1024 - 0.264280) <= 0.01
    detail = (f"min over n ≤ 2048 {worst:.6f} at n={worst_n} (≥ {floor:.6f}: {ok_floor}); "
              f"n=8 {r8:.7f} vs 0.322024 ± 1e-6 ({'ok' if ok8 else 'off by %.1e' % abs(r8 - 0.322024)}); "
              f"n=1024 {r1024:.6f} within 0.01 of 0.264280 ({ok1024})")
    assert report("threshold convergence", ok_floor and ok8 and ok1024, detail, el, 30)


def test_certificate_soundness():
    t0 = time.perf_counter()
    violations = env_violations = checked = env_checked = 0
    for c in (F(1, 4), cm.C_Q_EXACT):
        for sx, sy in random_feasible_pairs(100, c, seed=2024):
            for m in (2, 4, 8):
                rep = solver.converse_certificate(sx, sy, m, c)
                checked += 1
                violations += rep.certified_size_bound_log2 < rep.size_log2
                if rep.f_at_relaxed is not None:
                    env_checked += 1
                    env_violations += rep.entropy_sum > rep.f_at_relaxed + 1e-9
    el = time.perf_counter() - t0
    ok = violations == 0 and env_violations == 0 and env_checked > 0
    detail = (f"{checked} certificates (c in {{1/4, cQ}}, m in {{2,4,8}}), size-bound violations {violations}; "
              f"{env_checked} envelope comparisons, violations {env_violations}")
    assert report("converse certificate soundness", ok, detail, el, 60)


def test_property_suites():
    t0 = time.perf_counter()
    wanted = {
        "ceil reciprocal bound", "discretization sandwich", "discretization gap below 2/m",
        "entropy volume bound n=3", "volume monotone", "volume of (0.4,0.4,0.4) at n=3",
    }
    rows = [r for s in ("lemmas", "profiles") for r in verify.run_suite(s, seed=0) if r.name in wanted]
    v3 = volume_exact(Profile([F(2, 5)] * 3), 3)[0]
    el = time.perf_counter() - t0
    ok = len(rows) == len(wanted) and all(r.passed for r in rows) and v3 == 5
    detail = ", ".join(f"{r.name} ({r.samples}) {'ok' if r.passed else 'FAILED'}" for r in rows)
    assert report("property suites", ok, detail + f"; V3 = {v3}", el, 120)


def test_lhvm_suite():
    t0 = time.perf_counter()
    s_free = lhvm.chsh_value(lhvm.free_will_strategy(1))
    s_q = float(lhvm.chsh_value(lhvm.biased_strategy(cm.C_Q_EXACT)))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([7, 10])))
    lift_ok = True
    for _ in range(200):
        raw = [int(v) for v in rng.integers(0, 50, 4)]
        raw[int(rng.integers(0, 4))] += 1
        q = {p: F(r, sum(raw)) for p, r in zip(lhvm.PAIRS, raw)}
        marg = lhvm.setting_marginal(lhvm.uniform_marginal_lift(q))
        lift_ok &= all(marg[p] == F(1, 4) for p in lhvm.PAIRS)
    a = SettingSet.threshold(8, 3)
    st = lhvm.strategy_from_sets(a, a)
    s83 = float(lhvm.chsh_value(st))
    p83 = lhvm.randomness_measure(st)
    el = time.perf_counter() - t0
    ok_s83 = within(s83, 3.222104, 1e-6)
    ok_p83 = within(p83, 0.322024, 1e-6)
    ok = (s_free == 2 and within(s_q, cm.S_Q, 1e-12) and lift_ok and ok_s83 and s83 >= cm.S_Q and ok_p83)
    detail = (f"free-will S = {s_free} (exact 2: {s_free == 2}); cQ strategy S - S_Q = {s_q - cm.S_Q:.1e}; "
              f"200 lifts exact 1/4 marginals {lift_ok}; A83 S = {s83:.7f} vs 3.222104 ± 1e-6 "
              f"({'ok' if ok_s83 else 'off by %.1e' % abs(s83 - 3.222104)}), ≥ S_Q {s83 >= cm.S_Q}; "
              f"A83 P = {p83:.7f} vs 0.322024 ± 1e-6 ({'ok' if ok_p83 else 'off by %.1e' % abs(p83 - 0.322024)})")
    assert report("lhvm suite", ok, detail, el, 10)


def test_monte_carlo():
    t0 = time.perf_counter()
    st = lhvm.biased_strategy(cm.C_Q_EXACT)
    r1 = lhvm.simulate_runs(st, 10**6, seed=2024)
    r2 = lhvm.simulate_runs(st, 10**6, seed=2024)
    el = time.perf_counter() - t0
    z = abs(r1.empirical_s - 2.828427) / r1.standard_error
    same = json.dumps(r1.to_record()) == json.dumps(r2.to_record())
    ok = z <= 3 and same
    detail = (f"S_hat {r1.empirical_s:.6f} ± {r1.standard_error:.6f}, |z| = {z:.2f} (≤ 3); "
              f"repeat run byte-identical {same}")
    assert report("monte carlo", ok, detail, el, 60)


if __name__ == "__main__":
    import sys

    failures = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
