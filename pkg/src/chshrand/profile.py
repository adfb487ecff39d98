"""Profiles of sets of bit strings.

A set S of n-bit strings is summarised by its profile, the vector of column
means. Profiles are compared through their step-function view
``f_a(t) = a[ceil(t m)]`` so vectors of different lengths are comparable.
Profile entries are kept as exact rationals; floats only appear where an
entropy is taken.

Bit strings are held as integers with the first character as the most
significant bit, so integer order is lexicographic order on strings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .coremath import DomainError, binary_entropy


class ProfileError(ValueError):
    pass


def as_fraction(x) -> Fraction:
    """Exact rational for ``x``; floats are read through their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def bits_of(code: int, n: int) -> str:
    return format(code, f"0{n}b") if n else ""


def column_bit(code: int, n: int, i: int) -> int:
    """Bit in column ``i`` (0-based, left to right)."""
    return (code >> (n - 1 - i)) & 1


@dataclass(frozen=True)
class Profile:
    values: tuple[Fraction, ...]

    def __init__(self, values: Iterable) -> None:
        vals = tuple(as_fraction(v) for v in values)
        if not vals:
            raise ProfileError("a profile needs at least one component")
        for v in vals:
            if not 0 <= v <= 1:
                raise ProfileError(f"profile component {v} outside [0, 1]")
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def bounded(self) -> bool:
        return all(v <= Fraction(1, 2) for v in self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> Fraction:
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def floats(self) -> list[float]:
        return [float(v) for v in self.values]

    def is_decreasing(self) -> bool:
        return all(x >= y for x, y in zip(self.values, self.values[1:]))

    def is_increasing(self) -> bool:
        return all(x <= y for x, y in zip(self.values, self.values[1:]))


@dataclass(frozen=True)
class SettingSet:
    """Distinct n-bit strings, stored sorted as integer codes."""

    n: int
    members: tuple[int, ...]
    column_sums: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __init__(self, n: int, members: Iterable[int]) -> None:
        if n < 1:
            raise ProfileError("strings need at least one bit")
        ms = list(members)
        if len(set(ms)) != len(ms):
            raise ProfileError("duplicate member in setting set")
        top = 1 << n
        for c in ms:
            if not 0 <= c < top:
                raise ProfileError(f"code {c} is not an {n}-bit string")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "members", tuple(sorted(ms)))
        sums = [0] * n
        for c in self.members:
            for i in range(n):
                sums[i] += column_bit(c, n, i)
        object.__setattr__(self, "column_sums", tuple(sums))

    @classmethod
    def from_strings(cls, strings: Iterable[str]) -> "SettingSet":
        strings = list(strings)
        if not strings:
            raise ProfileError("cannot infer n from an empty list of strings")
        n = len(strings[0])
        codes = []
        for s in strings:
            if len(s) != n or set(s) - {"0", "1"}:
                raise ProfileError(f"malformed bit string {s!r}")
            codes.append(int(s, 2))
        return cls(n, codes)

    @classmethod
    def full(cls, n: int) -> "SettingSet":
        return cls(n, range(1 << n))

    @classmethod
    def threshold(cls, n: int, l: int) -> "SettingSet":
        """All n-bit strings with at most ``l`` ones."""
        return cls(n, (c for c in range(1 << n) if c.bit_count() <= l))

    @property
    def size(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def strings(self) -> list[str]:
        return [bits_of(c, self.n) for c in self.members]

    @cached_property
    def profile(self) -> Profile:
        return gamma(self)

    def sort_key(self) -> tuple[int, ...]:
        return self.members


def read_setting_set(path) -> SettingSet:
    """One bit string per line; blank lines ignored."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    return SettingSet.from_strings([ln for ln in lines if ln])


def write_setting_set(s: SettingSet, path) -> None:
    with open(path, "w") as fh:
        for b in s.strings():
            fh.write(b + "\n")


def gamma(s: SettingSet) -> Profile:
    if s.size == 0:
        return Profile([0] * s.n)
    return Profile(Fraction(c, s.size) for c in s.column_sums)


def char_eval(a: Profile, t) -> Fraction:
    """Step function f_a(t) = a_1 at 0, a_{ceil(t m)} elsewhere."""
    t = as_fraction(t)
    if not 0 <= t <= 1:
        raise DomainError(f"characteristic function is defined on [0, 1], got {t}")
    if t == 0:
        return a.values[0]
    return a.values[math.ceil(t * a.m) - 1]


def _union_cells(ma: int, mb: int):
    """(width, index_a, index_b) for each cell of the merged breakpoint grid."""
    cuts = sorted({Fraction(i, ma) for i in range(ma + 1)} | {Fraction(j, mb) for j in range(mb + 1)})
    for lo, hi in zip(cuts, cuts[1:]):
        mid = (lo + hi) / 2
        yield hi - lo, math.ceil(mid * ma) - 1, math.ceil(mid * mb) - 1


def profile_leq(a: Profile, b: Profile) -> bool:
    if a.values[0] > b.values[0]:
        return False
    return all(a.values[i] <= b.values[j] for _, i, j in _union_cells(a.m, b.m))


def inner_density(a: Profile, b: Profile) -> Fraction:
    """Integral of f_a f_b over [0, 1], exact."""
    if a.m == b.m:
        return sum((x * y for x, y in zip(a.values, b.values)), Fraction(0)) / a.m
    return sum((w * a.values[i] * b.values[j] for w, i, j in _union_cells(a.m, b.m)), Fraction(0))


def discretize(a: Profile, m: int, bound: str = "upper", direction: str = "decreasing") -> Profile:
    """Round a monotone profile onto an m-grid from above or below.

    For a decreasing profile the upper version samples the left end of each
    cell and rounds up; the lower version samples the right end and rounds
    down. Increasing profiles mirror this.
    """
    if m < 1:
        raise ProfileError("grid size must be positive")
    if bound not in ("upper", "lower"):
        raise ProfileError(f"unknown bound {bound!r}")
    if direction == "decreasing":
        if not a.is_decreasing():
            raise ProfileError("profile is not decreasing")
        left = bound == "upper"
    elif direction == "increasing":
        if not a.is_increasing():
            raise ProfileError("profile is not increasing")
        left = bound == "lower"
    else:
        raise ProfileError(f"unknown direction {direction!r}")
    out = []
    for i in range(1, m + 1):
        t = Fraction(i - 1, m) if left else Fraction(i, m)
        v = char_eval(a, t) * m
        out.append(Fraction(math.ceil(v) if bound == "upper" else math.floor(v), m))
    return Profile(out)


def discretization_gap(a: Profile, b: Profile, m: int) -> Fraction:
    """(1/m) sum a_bar b_bar - (1/n) sum a b; stays below 2/m."""
    if m < 2:
        raise ProfileError("gap bound needs m >= 2")
    if a.m != b.m:
        raise ProfileError("profiles must have the same length")
    if not (a.bounded and b.bounded):
        raise ProfileError("profile components must not exceed 1/2")
    a_bar = discretize(a, m, "upper", "decreasing")
    b_bar = discretize(b, m, "upper", "increasing")
    coarse = sum((x * y for x, y in zip(a_bar, b_bar)), Fraction(0)) / m
    return coarse - inner_density(a, b)


def cell_budgets(a: Profile, n: int) -> list[Fraction]:
    """Largest admissible mean for each of n columns under f_a.

    Column i owns ((i-1)/n, i/n]; its mean must not exceed f_a anywhere on
    that cell, so the budget is the minimum of a over overlapping cells.
    """
    budgets = []
    for i in range(n):
        lo, hi = Fraction(i, n), Fraction(i + 1, n)
        first = math.floor(lo * a.m)
        last = math.ceil(hi * a.m) - 1
        budgets.append(min(a.values[first:last + 1]))
    return budgets


def dominated_by(column_sums: Sequence[int], size: int, budgets: Sequence[Fraction]) -> bool:
    if size == 0:
        return True
    return all(s <= math.floor(b * size) for s, b in zip(column_sums, budgets))


MAX_EXHAUSTIVE_N = 4


def volume_exact(a: Profile, n: int) -> tuple[int, SettingSet]:
    """Largest S in {0,1}^n with gamma(S) <= a, by exhaustive search.

    Returns the size and the lexicographically least maximiser.
    """
    from . import kernels

    if not 1 <= n <= MAX_EXHAUSTIVE_N:
        raise ProfileError(f"exhaustive volume limited to 1 <= n <= {MAX_EXHAUSTIVE_N}")
    table = kernels.subset_table(n)
    budgets = cell_budgets(a, n)
    caps = np.array([[math.floor(b * k) for b in budgets] for k in range((1 << n) + 1)], dtype=np.int64)
    ok = (table.cols <= caps[table.sizes]).all(axis=1) & (table.sizes > 0)
    best = int(table.sizes[ok].max())
    cands = np.nonzero(ok & (table.sizes == best))[0]
    witness = min((int(m) for m in cands), key=kernels.mask_key)
    return best, SettingSet(n, kernels.mask_members(witness))


def volume_entropy_bound(a: Profile, n: int) -> float:
    """sum_k (l_k - l_{k-1}) h_b(a_k), l_k = floor(k n / m); bounds log2 V_n(a)."""
    if not a.bounded:
        raise ProfileError("entropy bound needs components <= 1/2")
    m = a.m
    total = 0.0
    prev = 0
    for k in range(1, m + 1):
        lk = k * n // m
        total += (lk - prev) * binary_entropy(float(a.values[k - 1]))
        prev = lk
    return total
