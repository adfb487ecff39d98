"""Scalar kernel: binary entropy, the two-entropy maximum f(t), its concave
envelope g(t) and the closed-form asymptotic randomness bounds.

Everything here is binary64; callers compare with explicit tolerances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

S_Q = 2.0 * math.sqrt(2.0)
C_Q = (4.0 - S_Q) / 8.0
# Fixed decimal stand-in for the irrational c_Q wherever exact comparisons are needed.
C_Q_LITERAL = "0.146446609406726"
C_Q_EXACT = Fraction(C_Q_LITERAL)

TANGENT_POINT = 0.14
CLOSED_FORM_START = 0.0625

_SCAN_POINTS = 1024
_REFINE_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the mathematical domain of the function."""


@dataclass(frozen=True)
class PhysicsConstants:
    s_q: float = S_Q
    c_q: float = C_Q


def binary_entropy(t: float) -> float:
    """h_b(t) = -t log2 t - (1-t) log2 (1-t), with h_b(0) = h_b(1) = 0."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"binary entropy undefined at t={t!r}")
    if t == 0.0 or t == 1.0:
        return 0.0
    return -t * math.log2(t) - (1.0 - t) * math.log2(1.0 - t)


def _hb_array(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    x = t[inside]
    out[inside] = -x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x)
    return out


def _check_quarter(t: float, name: str) -> float:
    t = float(t)
    if not 0.0 <= t <= 0.25:
        raise DomainError(f"{name} is defined on [0, 0.25], got {t!r}")
    return t


def _pair_entropy(x: float, t: float) -> float:
    return binary_entropy(x) + binary_entropy(min(t / x, 1.0))


def f_max(t: float) -> tuple[float, float]:
    """Maximise h_b(x) + h_b(t/x) over 2t <= x <= 1/2.

    Returns ``(value, argmax)``. A dense scan guards against secondary
    maxima (unimodality is not known below t = 1/16), then a ternary search
    polishes the best bracket.
    """
    t = _check_quarter(t, "f")
    lo = max(2.0 * t, 1e-12)
    hi = 0.5
    if hi - lo <= 0.0:
        return _pair_entropy(0.5, t), 0.5
    xs = np.linspace(lo, hi, _SCAN_POINTS)
    vals = _hb_array(xs) + _hb_array(np.minimum(t / xs, 1.0))
    k = int(np.argmax(vals))
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, _SCAN_POINTS - 1)]
    while b - a > _REFINE_TOL:
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if _pair_entropy(m1, t) < _pair_entropy(m2, t):
            a = m1
        else:
            b = m2
    x = 0.5 * (a + b)
    best_x, best_v = float(xs[k]), float(vals[k])
    v = _pair_entropy(x, t)
    if v >= best_v:
        best_x, best_v = x, v
    return best_v, best_x


def f_value(t: float) -> float:
    return f_max(t)[0]


def f0(t: float) -> float:
    """2 h_b(sqrt t), the closed form of f on [1/16, 1/4]."""
    t = _check_quarter(t, "f0")
    return 2.0 * binary_entropy(math.sqrt(t))


def _f0_slope(t: float) -> float:
    r = math.sqrt(t)
    return math.log2((1.0 - r) / r) / r


@dataclass(frozen=True)
class EnvelopePieces:
    """Tangent line of f0 at ``t_join`` glued to f0 itself on the right."""

    t_join: float = TANGENT_POINT

    @property
    def f1_slope(self) -> float:
        return _f0_slope(self.t_join)

    @property
    def f1_intercept(self) -> float:
        return f0(self.t_join) - self.f1_slope * self.t_join

    def f0_at(self, t: float) -> float:
        return f0(t)

    def f1_at(self, t: float) -> float:
        return self.f1_intercept + self.f1_slope * t


ENVELOPE = EnvelopePieces()


def concave_envelope_g(t: float) -> float:
    t = _check_quarter(t, "g")
    if t <= ENVELOPE.t_join:
        return ENVELOPE.f1_at(t)
    return f0(t)


def independent_bound(c: float) -> float:
    """4^(-h_b(sqrt c)): limit of the optimal randomness with independent settings."""
    return 4.0 ** (-binary_entropy(math.sqrt(c)))


def correlated_bound(c: float) -> float:
    s = 4.0 - 8.0 * c
    return 3.0 ** (-(s + 4.0) / 8.0) * 2.0 ** (-binary_entropy((4.0 - s) / 8.0))


def asymptotic_bounds(c: float) -> dict:
    """Both limiting bounds at constraint level ``c``.

    Only ``c = c_Q`` is established for the correlated formula; other values
    are reported with ``correlated_extrapolated = True``.
    """
    c = float(c)
    if not 0.0 < c <= 0.25:
        raise DomainError(f"constraint level must lie in (0, 1/4], got {c!r}")
    return {
        "c": c,
        "independent": independent_bound(c),
        "correlated": correlated_bound(c),
        "correlated_extrapolated": abs(c - C_Q) > 1e-12,
    }


def summary_table() -> dict:
    """Single-run and asymptotic optima, correlated vs independent settings."""
    return {
        "n1_correlated": (S_Q + 4.0) / 24.0,
        "n1_independent": S_Q / 8.0,
        "asymptotic_correlated": correlated_bound(C_Q),
        "asymptotic_independent": independent_bound(C_Q),
    }


def ceil_reciprocal_margin(x) -> Fraction | float:
    """x (ceil(1/x) - 1) - 1/3, exact when ``x`` is a Fraction. Never negative on (0, 1)."""
    if isinstance(x, Fraction):
        return x * (math.ceil(1 / x) - 1) - Fraction(1, 3)
    return x * (math.ceil(1.0 / x) - 1) - 1.0 / 3.0


def midpoint_concavity_probe(lo: float, hi: float, points: int = 200) -> float:
    """Worst midpoint-concavity defect of f on a grid over [lo, hi].

    Returns max over grid pairs of (f(t1)+f(t2))/2 - f((t1+t2)/2); a positive
    value means concavity fails somewhere on the grid. Purely exploratory.
    """
    grid = np.linspace(lo, hi, points)
    vals = [f_value(float(t)) for t in grid]
    worst = -math.inf
    for i in range(points):
        for j in range(i + 2, points, 2):
            mid = (i + j) // 2
            worst = max(worst, 0.5 * (vals[i] + vals[j]) - vals[mid])
    return worst
