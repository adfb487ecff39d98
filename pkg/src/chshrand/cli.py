"""chshrand command line.

Exit codes: 0 success, 1 infeasible or failing result, 2 invalid input.
Every report carries ``"schema": 1``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction

from . import coremath as cm
from . import lhvm, solver, verify
from .coremath import DomainError
from .profile import ProfileError, SettingSet, read_setting_set

SCHEMA = 1
WORKERS_ENV = "CHSHRAND_WORKERS"

EXIT_OK, EXIT_INFEASIBLE, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- output

def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


def render(payload: dict, rows: list[dict] | None, columns: list[str] | None, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows or []:
            writer.writerow({k: _csv_value(row.get(k)) for k in columns})
        return buf.getvalue()
    return json.dumps(payload, indent=2) + "\n"


def emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report(command: str, **body) -> dict:
    return {"schema": SCHEMA, "command": command, **body}


# ---------------------------------------------------------------- commands

def cmd_bound(args):
    c = solver.parse_level(args.c)
    rec = cm.asymptotic_bounds(float(c))
    rec["c"] = solver.level_text(c)
    cols = ["c", "independent", "correlated", "correlated_extrapolated"]
    return EXIT_OK, _report("bound", **rec), [rec], cols


def cmd_table1(args):
    t = cm.summary_table()
    rows = [
        {"setting": "single run", "correlated": t["n1_correlated"], "independent": t["n1_independent"]},
        {"setting": "asymptotic", "correlated": t["asymptotic_correlated"], "independent": t["asymptotic_independent"]},
    ]
    return EXIT_OK, _report("table1", **t), rows, ["setting", "correlated", "independent"]


def cmd_f_eval(args):
    ts = args.t if args.t else [float(cm.C_Q)]
    rows = []
    for t in ts:
        value, arg = cm.f_max(t)
        rows.append({
            "t": t,
            "f": value,
            "argmax": float(arg),
            "f0": cm.f0(t),
            "g": cm.concave_envelope_g(t),
        })
    return EXIT_OK, _report("f-eval", rows=rows), rows, ["t", "f", "argmax", "f0", "g"]


def cmd_solve_uniform(args):
    res = solver.solve_uniform_exact(args.n, args.c, allow_n4=args.allow_n4)
    rec = res.to_record()
    return EXIT_OK, _report("solve-uniform", **rec), [res.csv_row()], solver.SOLVE_CSV_COLUMNS


def cmd_solve_dist(args):
    res = solver.bracket_P_n(args.n, args.c)
    rec = res.to_record()
    return EXIT_OK, _report("solve-dist", **rec), [res.csv_row()], solver.SOLVE_CSV_COLUMNS


CONSTRUCT_COLUMNS = [
    "n", "l", "size_log2", "constraint_float", "objective", "objective_minus_limit", "best_l", "best_objective",
]


def convergence_table(n_list, c) -> list[dict]:
    return [solver.threshold_construct(n, c).to_record() for n in n_list]


def cmd_construct(args):
    if args.n_list:
        if args.l is not None:
            raise UsageError("--l applies to a single --n")
        rows = convergence_table(args.n_list, args.c)
        return EXIT_OK, _report("construct", rows=rows), rows, CONSTRUCT_COLUMNS
    if args.n is None:
        raise UsageError("construct needs --n or --n-list")
    rec = solver.threshold_construct(args.n, args.c, args.l).to_record()
    return EXIT_OK, _report("construct", **rec), [rec], CONSTRUCT_COLUMNS


CERT_COLUMNS = [
    "n", "m", "c", "constraint", "entropy_sum", "exact_exponent", "f_at_relaxed",
    "certified_size_bound_log2", "size_log2", "sound",
]


def _load_set(path: str) -> SettingSet:
    try:
        return read_setting_set(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def cmd_certify(args):
    if args.x is None:
        raise UsageError("certify needs --x (and optionally --y)")
    s_x = _load_set(args.x)
    s_y = _load_set(args.y) if args.y else s_x
    rep = solver.converse_certificate(s_x, s_y, args.m, args.c)
    rec = rep.to_record()
    code = EXIT_OK if rep.sound else EXIT_INFEASIBLE
    return code, _report("certify", **rec), [rec], CERT_COLUMNS


def cmd_verify(args):
    results = verify.run_suite(args.suite, seed=args.seed, samples=args.samples)
    rows = [r.to_record() for r in results]
    ok = all(r.passed for r in results)
    payload = _report("verify", suite=args.suite, seed=args.seed, passed=ok, rows=rows)
    return (EXIT_OK if ok else EXIT_INFEASIBLE), payload, rows, verify.VERIFY_CSV_COLUMNS


def _preset_strategy(name: str, c: Fraction) -> lhvm.LhvmStrategy:
    if name == "free-will":
        return lhvm.free_will_strategy(1)
    if name == "sq":
        return lhvm.biased_strategy(c)
    if name == "threshold8":
        a = SettingSet.threshold(8, 3)
        return lhvm.strategy_from_sets(a, a)
    raise UsageError(f"unknown strategy preset {name!r}")


def resolve_workers(args) -> int:
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be positive")
        return args.workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            w = int(env)
        except ValueError as exc:
            raise UsageError(f"{WORKERS_ENV} must be an integer") from exc
        if w < 1:
            raise UsageError(f"{WORKERS_ENV} must be positive")
        return w
    if args.parallel:
        return os.cpu_count() or 1
    return 1


def cmd_simulate(args):
    if args.strategy:
        try:
            st = lhvm.load_strategy(args.strategy)
        except OSError as exc:
            raise UsageError(f"cannot read {args.strategy}: {exc}") from exc
    else:
        st = _preset_strategy(args.preset, solver.parse_level(args.c))
    rep = lhvm.simulate_runs(st, args.runs, args.seed, workers=resolve_workers(args))
    rec = rep.to_record()
    exact = lhvm.chsh_value(st)
    rec["analytic_s"] = float(exact)
    rec["analytic_p"] = lhvm.randomness_measure(st)
    return EXIT_OK, _report("simulate", **rec), [rec], lhvm.SIM_CSV_COLUMNS + ["analytic_s", "analytic_p"]


COMMANDS = {
    "bound": cmd_bound,
    "f-eval": cmd_f_eval,
    "solve-uniform": cmd_solve_uniform,
    "solve-dist": cmd_solve_dist,
    "construct": cmd_construct,
    "certify": cmd_certify,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "table1": cmd_table1,
}


# ---------------------------------------------------------------- parser

def _n_list(text: str) -> list[int]:
    try:
        out = [int(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad n list {text!r}") from exc
    if not out or any(v < 1 for v in out):
        raise argparse.ArgumentTypeError("n values must be positive")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--c", default=cm.C_Q_LITERAL, help="constraint level as a decimal or p/q (default: %(default)s)")
    common.add_argument("--c-preset", choices=["cq"], help="named constraint level; cq is the default literal")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")

    p = argparse.ArgumentParser(prog="chshrand", description="Setting-randomness bounds for CHSH violations.")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("bound", parents=[common], help="asymptotic bounds at level c")
    sub.add_parser("table1", parents=[common], help="single-run and asymptotic summary table")

    fe = sub.add_parser("f-eval", parents=[common], help="evaluate f, f0 and g")
    fe.add_argument("--t", type=float, nargs="+")

    su = sub.add_parser("solve-uniform", parents=[common], help="exact uniform-support optimum")
    su.add_argument("--n", type=int, required=True)
    su.add_argument("--allow-n4", action="store_true")

    sd = sub.add_parser("solve-dist", parents=[common], help="bracket for the distribution problem")
    sd.add_argument("--n", type=int, required=True)

    co = sub.add_parser("construct", parents=[common], help="threshold-set construction")
    co.add_argument("--n", type=int)
    co.add_argument("--n-list", type=_n_list, help="comma separated n values for a convergence table")
    co.add_argument("--l", type=int)

    ce = sub.add_parser("certify", parents=[common], help="converse certificate for a set pair")
    ce.add_argument("--x", help="file with the X setting strings, one per line")
    ce.add_argument("--y", help="file with the Y setting strings (defaults to --x)")
    ce.add_argument("--m", type=int, default=8)

    ve = sub.add_parser("verify", parents=[common], help="seeded property suites")
    ve.add_argument("--suite", choices=list(verify.SUITES) + ["all"], default="all")
    ve.add_argument("--samples", type=int)
    ve.add_argument("--seed", type=int, default=0)

    si = sub.add_parser("simulate", parents=[common], help="Monte Carlo CHSH estimate")
    src = si.add_mutually_exclusive_group()
    src.add_argument("--strategy", help="strategy JSON file")
    src.add_argument("--preset", choices=["free-will", "sq", "threshold8"], default="sq")
    si.add_argument("--runs", "--tests", dest="runs", type=int, default=1_000_000, help="number of tests")
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--parallel", action="store_true", help=f"use a worker pool (size from --workers, {WORKERS_ENV}, or the CPU count)")
    si.add_argument("--workers", type=int)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.c_preset == "cq":
        args.c = cm.C_Q_LITERAL
    try:
        code, payload, rows, cols = COMMANDS[args.command](args)
    except solver.InfeasibleError as exc:
        print(f"chshrand: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, DomainError, ProfileError, lhvm.StrategyError, ValueError, ZeroDivisionError) as exc:
        print(f"chshrand: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = render(payload, rows, cols, args.format)
    try:
        emit(text, args.output)
    except OSError as exc:
        print(f"chshrand: cannot write {args.output}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return code


if __name__ == "__main__":
    sys.exit(main())
