"""Randomised invariants driven by hypothesis."""
import math
from fractions import Fraction as F

from hypothesis import given, settings, strategies as st

from chshrand import coremath as cm
from chshrand import lhvm, solver
from chshrand.profile import (
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

fracs = st.fractions(min_value=0, max_value=1, max_denominator=48)
half_fracs = st.fractions(min_value=0, max_value=F(1, 2), max_denominator=48)


@st.composite
def monotone(draw, direction, bound_half=True, max_len=10):
    vals = draw(st.lists(half_fracs if bound_half else fracs, min_size=1, max_size=max_len))
    vals.sort(reverse=direction == "decreasing")
    return Profile(vals)


@st.composite
def setting_sets(draw, n=None, max_n=6):
    n = draw(st.integers(1, max_n)) if n is None else n
    members = draw(st.sets(st.integers(0, (1 << n) - 1), min_size=1, max_size=1 << n))
    return SettingSet(n, members)


@st.composite
def set_pairs(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    return draw(setting_sets(n=n)), draw(setting_sets(n=n))


@given(st.floats(0, 1))
def test_entropy_symmetric_and_bounded(t):
    h = cm.binary_entropy(t)
    assert 0 <= h <= 1
    assert abs(h - cm.binary_entropy(1 - t)) <= 1e-12


@given(st.floats(cm.CLOSED_FORM_START, 0.25))
def test_closed_form_region(t):
    assert abs(cm.f_value(t) - cm.f0(t)) <= 1e-6


@given(st.floats(0, 0.25))
def test_envelope_above_f(t):
    assert cm.concave_envelope_g(t) >= cm.f_value(t) - 1e-9


@given(st.fractions(min_value=F(1, 10**6), max_value=F(999999, 10**6), max_denominator=10**6))
def test_ceil_reciprocal(x):
    assert x * (math.ceil(1 / x) - 1) >= F(1, 3)


@given(monotone("decreasing", bound_half=False), st.integers(2, 16))
def test_sandwich_decreasing(a, m):
    assert profile_leq(discretize(a, m, "lower", "decreasing"), a)
    assert profile_leq(a, discretize(a, m, "upper", "decreasing"))


@given(monotone("increasing", bound_half=False), st.integers(2, 16))
def test_sandwich_increasing(a, m):
    assert profile_leq(discretize(a, m, "lower", "increasing"), a)
    assert profile_leq(a, discretize(a, m, "upper", "increasing"))


@given(st.data(), st.integers(1, 10), st.integers(2, 16))
def test_gap_strict(data, n, m):
    a = data.draw(monotone("decreasing", max_len=n).filter(lambda p: p.m == n) | st.just(Profile([0] * n)))
    b = data.draw(monotone("increasing", max_len=n).filter(lambda p: p.m == n) | st.just(Profile([F(1, 2)] * n)))
    assert discretization_gap(a, b, m) < F(2, m)


@given(st.lists(fracs, min_size=1, max_size=8), st.lists(fracs, min_size=1, max_size=8))
def test_inner_density_symmetric_and_bounded(x, y):
    a, b = Profile(x), Profile(y)
    d = inner_density(a, b)
    assert d == inner_density(b, a)
    assert 0 <= d <= 1


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.lists(st.fractions(0, 1, max_denominator=10), min_size=1, max_size=4),
       st.lists(st.integers(0, 3), min_size=4, max_size=4))
def test_volume_monotone(n, vals, bumps):
    p = Profile(vals)
    q = Profile(min(F(1), v + F(b, 10)) for v, b in zip(vals, bumps))
    assert profile_leq(p, q)
    assert volume_exact(p, n)[0] <= volume_exact(q, n)[0]


@settings(max_examples=60, deadline=None)
@given(st.lists(half_fracs, min_size=1, max_size=4), st.integers(1, 4))
def test_volume_below_entropy(vals, n):
    a = Profile(vals)
    size, witness = volume_exact(a, n)
    assert math.log2(size) <= volume_entropy_bound(a, n) + 1e-12
    assert profile_leq(gamma(witness), a) or size == 1


@given(set_pairs())
def test_canonicalize(pair):
    sx, sy = pair
    cx, cy = solver.canonicalize(sx, sy)
    a, b = gamma(cx), gamma(cy)
    assert (cx.size, cy.size) == (sx.size, sy.size)
    assert a.is_decreasing() and b.is_increasing() and a.bounded and b.bounded
    assert solver.constraint_density(cx, cy) <= solver.constraint_density(sx, sy)


@settings(deadline=None)
@given(set_pairs(), st.sampled_from([2, 3, 4, 8]))
def test_certificate_sound(pair, m):
    sx, sy = solver.canonicalize(*pair)  # guarantees density <= 1/4
    rep = solver.converse_certificate(sx, sy, m, F(1, 4))
    assert rep.certified_size_bound_log2 >= rep.size_log2 - 1e-12
    assert rep.gap_ok
    if rep.f_at_relaxed is not None:
        assert rep.entropy_sum <= rep.f_at_relaxed + 1e-9


@given(st.dictionaries(st.integers(0, 15), st.floats(0, 1), min_size=16, max_size=16),
       st.floats(1 / 16, 0.99))
def test_reduction_contract(theta, cap):
    p = solver.lp_extreme_point(theta, cap)
    assert abs(sum(p.values()) - 1) <= 1e-12
    u = solver.uniformize(p, theta)
    assert max(u.values()) <= 3 * cap + 1e-12
    assert sum(v * theta[x] for x, v in u.items()) <= sum(v * theta[x] for x, v in p.items()) + 1e-12


q_star = st.lists(st.integers(0, 20), min_size=4, max_size=4).filter(lambda v: sum(v) > 0).map(
    lambda v: {p: F(c, sum(v)) for p, c in zip(lhvm.PAIRS, v)})


@given(q_star)
def test_lift(q):
    st_ = lhvm.uniform_marginal_lift(q)
    assert all(v == F(1, 4) for v in lhvm.setting_marginal(st_).values())
    assert lhvm.randomness_measure(st_) == float(max(q.values()))
    assert lhvm.chsh_value(st_) == 4 * (q[(0, 0)] + q[(0, 1)] + q[(1, 0)] - q[(1, 1)])


@given(st.lists(st.tuples(st.integers(1, 9), st.tuples(*[st.integers(0, 1)] * 4)), min_size=1, max_size=5))
def test_classical_bound(components):
    total = sum(w for w, _ in components)
    uniform = lhvm.JointSettings({p: F(1, 4) for p in lhvm.PAIRS})
    st_ = lhvm.LhvmStrategy(1, [
        lhvm.LambdaComponent(F(w, total), uniform, lhvm.OutputFunctions(*bits)) for w, bits in components
    ])
    assert lhvm.chsh_value(st_) <= 2


@given(set_pairs(max_n=5))
def test_sets_strategy_consistency(pair):
    sx, sy = pair
    st_ = lhvm.strategy_from_sets(sx, sy)
    s = lhvm.chsh_value(st_)
    assert s == 4 - 8 * solver.constraint_density(sx, sy)
    assert -4 <= s <= 4
    p = lhvm.randomness_measure(st_)
    assert 0.25 - 1e-12 <= p <= 1
    assert math.isclose(p, (sx.size * sy.size) ** (-1 / sx.n), rel_tol=1e-12)
