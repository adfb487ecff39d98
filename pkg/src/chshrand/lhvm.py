"""Local hidden variable strategies for n-run CHSH tests.

A strategy mixes hidden-variable values lambda with weights q(lambda). Each
value fixes deterministic outputs a(x), b(y) and a distribution over pairs
of n-bit setting strings, stored either jointly or as a product.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Union

import numpy as np

from . import kernels
from .profile import SettingSet, bits_of, column_bit

Mass = Union[Fraction, float]

PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))
DEFAULT_SHARD = 1 << 16
MAX_SIM_N = 30


class StrategyError(ValueError):
    pass


@dataclass(frozen=True)
class OutputFunctions:
    a0: int = 0
    a1: int = 0
    b0: int = 0
    b1: int = 0

    def __post_init__(self) -> None:
        for v in (self.a0, self.a1, self.b0, self.b1):
            if v not in (0, 1):
                raise StrategyError("output bits must be 0 or 1")

    def sign(self, x: int, y: int) -> int:
        a = self.a1 if x else self.a0
        b = self.b1 if y else self.b0
        return -1 if (a ^ b ^ (x & y)) else 1

    def signs(self) -> tuple[int, int, int, int]:
        return tuple(self.sign(x, y) for x, y in PAIRS)


ZERO_OUTPUTS = OutputFunctions()


def _check_dist(p: Mapping, what: str) -> None:
    if not p:
        raise StrategyError(f"{what} is empty")
    if any(v < 0 for v in p.values()):
        raise StrategyError(f"{what} has a negative mass")
    total = sum(p.values())
    exact = all(isinstance(v, (Fraction, int)) for v in p.values())
    if (exact and total != 1) or (not exact and abs(float(total) - 1.0) > 1e-12):
        raise StrategyError(f"{what} sums to {total}, not 1")


@dataclass
class JointSettings:
    masses: dict[tuple[int, int], Mass]

    product = False

    def validate(self, n: int) -> None:
        _check_dist(self.masses, "joint setting distribution")
        top = 1 << n
        if any(not (0 <= x < top and 0 <= y < top) for x, y in self.masses):
            raise StrategyError(f"setting pair outside {{0,1}}^{n}")

    def max_mass(self) -> Mass:
        return max(self.masses.values())

    def pair_fractions(self, n: int) -> dict[tuple[int, int], Mass]:
        """pi(x, y): expected fraction of runs with setting pair (x, y)."""
        acc = {p: 0 for p in PAIRS}
        for (xs, ys), q in self.masses.items():
            n11 = (xs & ys).bit_count()
            n10 = (xs & ~ys).bit_count()
            n01 = (~xs & ys & ((1 << n) - 1)).bit_count()
            n00 = n - n11 - n10 - n01
            for pair, cnt in zip(PAIRS, (n00, n01, n10, n11)):
                if cnt:
                    acc[pair] = acc[pair] + q * Fraction(cnt, n)
        return acc


@dataclass
class ProductSettings:
    px: dict[int, Mass]
    py: dict[int, Mass]

    product = True

    def validate(self, n: int) -> None:
        _check_dist(self.px, "x setting distribution")
        _check_dist(self.py, "y setting distribution")
        top = 1 << n
        if any(not 0 <= s < top for s in list(self.px) + list(self.py)):
            raise StrategyError(f"setting string outside {{0,1}}^{n}")

    def max_mass(self) -> Mass:
        return max(self.px.values()) * max(self.py.values())

    def pair_fractions(self, n: int) -> dict[tuple[int, int], Mass]:
        mx = _bit_means(self.px, n)
        my = _bit_means(self.py, n)
        acc = {p: 0 for p in PAIRS}
        for u, v in zip(mx, my):
            acc[(1, 1)] += u * v
            acc[(1, 0)] += u * (1 - v)
            acc[(0, 1)] += (1 - u) * v
            acc[(0, 0)] += (1 - u) * (1 - v)
        return {p: _div(s, n) for p, s in acc.items()}


def _div(v, n: int):
    return Fraction(v, n) if isinstance(v, int) else v / n


def _bit_means(p: Mapping[int, Mass], n: int) -> list:
    means = [0] * n
    for code, q in p.items():
        for i in range(n):
            if column_bit(code, n, i):
                means[i] = means[i] + q
    return means


Settings = Union[JointSettings, ProductSettings]


@dataclass
class LambdaComponent:
    weight: Mass
    settings: Settings
    outputs: OutputFunctions = ZERO_OUTPUTS


@dataclass
class LhvmStrategy:
    n: int
    lambdas: list[LambdaComponent]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise StrategyError("a test has at least one run")
        if not self.lambdas:
            raise StrategyError("strategy needs at least one hidden-variable value")
        _check_dist({i: lam.weight for i, lam in enumerate(self.lambdas)}, "hidden-variable weights")
        for lam in self.lambdas:
            lam.settings.validate(self.n)


def chsh_value(strategy: LhvmStrategy) -> Mass:
    """S = sum_lambda q(lambda) * 4 * sum_{x,y} (-1)^(a(x)+b(y)+xy) pi(x,y|lambda).

    Exact (a Fraction) when every probability is rational.
    """
    total = 0
    for lam in strategy.lambdas:
        pi = lam.settings.pair_fractions(strategy.n)
        s_lam = sum(lam.outputs.sign(x, y) * pi[(x, y)] for x, y in PAIRS)
        total = total + lam.weight * 4 * s_lam
    return total


def randomness_measure(strategy: LhvmStrategy) -> float:
    """(max over lambda and setting pairs of q(x, y | lambda))^(1/n)."""
    top = max(lam.settings.max_mass() for lam in strategy.lambdas if lam.weight > 0)
    return float(top) ** (1.0 / strategy.n)


def setting_marginal(strategy: LhvmStrategy) -> dict[tuple[int, int], Mass]:
    """sum_lambda q(lambda) q(x, y | lambda) over pairs of setting strings."""
    out: dict[tuple[int, int], Mass] = {}
    for lam in strategy.lambdas:
        s = lam.settings
        items = (
            ((x, y), px * py) for x, px in s.px.items() for y, py in s.py.items()
        ) if s.product else s.masses.items()
        for key, q in items:
            out[key] = out.get(key, 0) + lam.weight * q
    return out


# (a0, a1, b0, b1) in the conventional row order of the a(0) = 0 assignments.
_OUTPUT_ROWS = (
    (0, 0, 0, 0), (0, 0, 0, 1), (0, 1, 0, 0), (0, 1, 1, 0),
    (0, 0, 1, 0), (0, 0, 1, 1), (0, 1, 0, 1), (0, 1, 1, 1),
)


def output_tables() -> list[dict]:
    """The eight deterministic output assignments with a(0) = 0 and the
    signs of q(00), q(01), q(10), q(11) in S_lambda / 4."""
    rows = []
    for idx, bits in enumerate(_OUTPUT_ROWS, start=1):
        out = OutputFunctions(*bits)
        rows.append({"index": idx, "outputs": out, "s_over_4_coefficients": out.signs()})
    return rows


# lambda -> (x flip, y flip) and output row for the uniform-marginal lift
_LIFT = (((0, 0), 0), ((1, 0), 1), ((0, 1), 2), ((1, 1), 3))


def uniform_marginal_lift(q_star: Mapping[tuple[int, int], Mass]) -> LhvmStrategy:
    """Four equally likely lambdas whose settings permute q_star.

    The setting marginal becomes exactly uniform while the largest setting
    probability and the CHSH value 4 (q00 + q01 + q10 - q11) are kept.
    """
    q = {p: q_star.get(p, 0) for p in PAIRS}
    if set(q_star) - set(PAIRS):
        raise StrategyError("q_star must be a distribution over {0,1}^2")
    _check_dist(q, "q_star")
    exact = all(isinstance(v, (Fraction, int)) for v in q.values())
    w = Fraction(1, 4) if exact else 0.25
    lambdas = []
    for (fx, fy), row in _LIFT:
        masses = {(x, y): q[(x ^ fx, y ^ fy)] for x, y in PAIRS}
        lambdas.append(LambdaComponent(w, JointSettings(masses), OutputFunctions(*_OUTPUT_ROWS[row])))
    return LhvmStrategy(1, lambdas)


def strategy_from_sets(s_x: SettingSet, s_y: SettingSet) -> LhvmStrategy:
    """One lambda, settings uniform on S_X x S_Y, all outputs zero."""
    if s_x.size == 0 or s_y.size == 0:
        raise StrategyError("setting sets must be nonempty")
    if s_x.n != s_y.n:
        raise StrategyError("setting sets must share the string length")
    px = {x: Fraction(1, s_x.size) for x in s_x.members}
    py = {y: Fraction(1, s_y.size) for y in s_y.members}
    return LhvmStrategy(s_x.n, [LambdaComponent(Fraction(1), ProductSettings(px, py))])


def free_will_strategy(n: int = 1) -> LhvmStrategy:
    """Uniform independent settings, zero outputs: the classical S = 2 point."""
    full = SettingSet.full(n)
    return strategy_from_sets(full, full)


def biased_strategy(q11) -> LhvmStrategy:
    """Single run, one lambda, q(1,1) = q11 and the rest uniform over the
    other three pairs; zero outputs give S = 4 - 8 q11."""
    q11 = Fraction(q11) if not isinstance(q11, float) else q11
    rest = (1 - q11) / 3
    masses = {(0, 0): rest, (0, 1): rest, (1, 0): rest, (1, 1): q11}
    one = Fraction(1) if isinstance(q11, Fraction) else 1.0
    return LhvmStrategy(1, [LambdaComponent(one, JointSettings(masses))])


# ---------------------------------------------------------------- file format

def _parse_prob(v) -> Mass:
    if isinstance(v, str):
        return Fraction(v.strip())
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return v
    raise StrategyError(f"cannot read probability {v!r}")


def _parse_bits(s: str, n: int) -> int:
    s = s.strip()
    if len(s) != n or set(s) - {"0", "1"}:
        raise StrategyError(f"malformed {n}-bit string {s!r}")
    return int(s, 2)


def strategy_from_dict(doc: dict) -> LhvmStrategy:
    try:
        n = int(doc["n"])
        lambdas = []
        for entry in doc["lambdas"]:
            settings = entry["settings"]
            if "joint" in settings:
                masses = {}
                for key, v in settings["joint"].items():
                    xs, ys = key.split(",")
                    masses[(_parse_bits(xs, n), _parse_bits(ys, n))] = _parse_prob(v)
                st: Settings = JointSettings(masses)
            elif "product" in settings:
                prod = settings["product"]
                st = ProductSettings(
                    {_parse_bits(k, n): _parse_prob(v) for k, v in prod["x"].items()},
                    {_parse_bits(k, n): _parse_prob(v) for k, v in prod["y"].items()},
                )
            else:
                raise StrategyError("settings need a 'joint' or 'product' entry")
            outs = entry.get("outputs", {})
            lambdas.append(LambdaComponent(
                _parse_prob(entry["weight"]),
                st,
                OutputFunctions(*(int(outs.get(k, 0)) for k in ("a0", "a1", "b0", "b1"))),
            ))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, StrategyError):
            raise
        raise StrategyError(f"malformed strategy document: {exc}") from exc
    return LhvmStrategy(n, lambdas)


def _prob_str(v: Mass) -> str:
    return str(v) if isinstance(v, (Fraction, int)) else repr(float(v))


def strategy_to_dict(strategy: LhvmStrategy) -> dict:
    n = strategy.n
    out = []
    for lam in strategy.lambdas:
        s = lam.settings
        if s.product:
            settings = {"product": {
                "x": {bits_of(k, n): _prob_str(v) for k, v in sorted(s.px.items())},
                "y": {bits_of(k, n): _prob_str(v) for k, v in sorted(s.py.items())},
            }}
        else:
            settings = {"joint": {
                f"{bits_of(x, n)},{bits_of(y, n)}": _prob_str(v) for (x, y), v in sorted(s.masses.items())
            }}
        o = lam.outputs
        out.append({
            "weight": _prob_str(lam.weight),
            "settings": settings,
            "outputs": {"a0": o.a0, "a1": o.a1, "b0": o.b0, "b1": o.b1},
        })
    return {"n": n, "lambdas": out}


def load_strategy(path) -> LhvmStrategy:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StrategyError(f"strategy file is not JSON: {exc}") from exc
    return strategy_from_dict(doc)


def save_strategy(strategy: LhvmStrategy, path) -> None:
    with open(path, "w") as fh:
        json.dump(strategy_to_dict(strategy), fh, indent=2)


# ---------------------------------------------------------------- simulation

@dataclass
class SimulationReport:
    runs: int
    n: int
    empirical_s: float
    standard_error: float | None
    empirical_p: float
    seed: int
    shards: int

    def to_record(self) -> dict:
        return {
            "tests": self.runs,
            "n": self.n,
            "empirical_s": self.empirical_s,
            "standard_error": self.standard_error,
            "empirical_p": self.empirical_p,
            "seed": self.seed,
            "shards": self.shards,
        }


SIM_CSV_COLUMNS = ["tests", "n", "empirical_s", "standard_error", "empirical_p", "seed", "shards"]


def _tables(strategy: LhvmStrategy):
    lam_cum = np.cumsum([float(l.weight) for l in strategy.lambdas])
    mode, x_off, y_off = [], [0], [0]
    xc, xp, xq, yc, yq = [], [], [], [], []
    for lam in strategy.lambdas:
        s = lam.settings
        if s.product:
            mode.append(0)
            xs = sorted(s.px.items())
            ys = sorted(s.py.items())
            xc += [k for k, _ in xs]
            xp += [0] * len(xs)
            xq += list(np.cumsum([float(v) for _, v in xs]))
            yc += [k for k, _ in ys]
            yq += list(np.cumsum([float(v) for _, v in ys]))
        else:
            mode.append(1)
            pairs = sorted(s.masses.items())
            xc += [x for (x, _), _ in pairs]
            xp += [y for (_, y), _ in pairs]
            xq += list(np.cumsum([float(v) for _, v in pairs]))
        x_off.append(len(xc))
        y_off.append(len(yc))
    signs = [l.outputs.signs() for l in strategy.lambdas]
    as_i = lambda v: np.asarray(v, dtype=np.int64)
    as_f = lambda v: np.asarray(v, dtype=np.float64)
    return (as_f(lam_cum), as_i(mode), as_i(x_off), as_i(xc), as_i(xp), as_f(xq),
            as_i(y_off), as_i(yc), as_f(yq), as_i(signs).reshape(-1, 4))


def shard_plan(tests: int, shard_size: int = DEFAULT_SHARD) -> list[int]:
    """Test counts per shard; fixed for a given total so results never
    depend on how many workers run the shards."""
    full, rest = divmod(tests, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def _shard_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def _run_shard(tables, n: int, seed: int, index: int, count: int):
    u = _shard_rng(seed, index).random((count, 3))
    s, lam, xs, ys = kernels.tally_tests(u, *tables, n)
    s1 = int(s.sum())
    s2 = int(np.dot(s, s))
    key = (lam << (2 * n)) | (xs << n) | ys
    uniq, cnt = np.unique(key, return_counts=True)
    return s1, s2, dict(zip(uniq.tolist(), cnt.tolist()))


def simulate_runs(strategy: LhvmStrategy, tests: int, seed: int, workers: int = 1,
                  shard_size: int = DEFAULT_SHARD) -> SimulationReport:
    """Monte Carlo estimate of S from ``tests`` independent n-run tests.

    Each test draws lambda, then the settings (jointly or per side, by
    cumulative mass in string order), and scores
    4/n * sum_k (-1)^(a(x_k)+b(y_k)+x_k y_k). Shard k draws from a Philox
    stream keyed by (seed, k); sums are integers, so any worker count gives
    the same report.
    """
    if tests < 1:
        raise ValueError("need at least one test")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    n = strategy.n
    if n > MAX_SIM_N:
        raise ValueError(f"simulation supports n <= {MAX_SIM_N}")
    tables = _tables(strategy)
    plan = shard_plan(tests, shard_size)
    jobs = [(tables, n, seed, i, cnt) for i, cnt in enumerate(plan)]
    if workers > 1 and len(plan) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _run_shard(*a), jobs))
    else:
        parts = [_run_shard(*a) for a in jobs]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    counts: Counter = Counter()
    for p in parts:
        counts.update(p[2])
    lam_counts: Counter = Counter()
    for key, cnt in counts.items():
        lam_counts[key >> (2 * n)] += cnt
    p_hat = max(Fraction(cnt, lam_counts[key >> (2 * n)]) for key, cnt in counts.items())
    mean_s = Fraction(s1, tests)
    scale = Fraction(4, n)
    if tests > 1:
        var = (Fraction(s2) - Fraction(s1 * s1, tests)) / (tests - 1)
        se = float(scale) * math.sqrt(float(var) / tests)
    else:
        se = None
    return SimulationReport(
        runs=tests,
        n=n,
        empirical_s=float(scale * mean_s),
        standard_error=se,
        empirical_p=float(p_hat) ** (1.0 / n),
        seed=seed,
        shards=len(plan),
    )
