"""Command-line interface: thresholds, sweeps, simulations, fits and checks.

Exit codes: 0 success, 1 usage error, 2 numerical failure (non-convergence,
flagged simulation points, failed verification).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from .replica import ConvergenceError, SolverConfig, solve_bi_orthogonal_threshold, solve_rot_invariant_threshold

# kept in sync with randmat.KINDS, experiment and verify; those modules pull
# in the LP kernel and are imported only by the commands that need them
KINDS = ("bi-orthogonal", "iid-gaussian")
SUITES = ("specfun", "haarint", "replica", "lp")
CURVES_FILE, FIT_FILE = "curves.csv", "fit.csv"

SEED_ENV = "BIORTHO_SEED"
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_list(text: str, cast=float) -> list:
    """Comma list (``16,18,20``) or inclusive range ``start:stop:step``."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            values = [round(start + i * step, 12) for i in range(count)]
        else:
            values = [float(t) for t in text.split(",") if t.strip()]
        if not values:
            raise ValueError
        if cast is int:
            if any(v != int(v) for v in values):
                raise ValueError
            return [int(v) for v in values]
        return values
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse list {text!r}; use a,b,c or start:stop:step") from None


def int_list(text):
    return parse_list(text, int)


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        seed = int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if seed < 0:
        raise UsageError(f"{SEED_ENV} must be non-negative")
    return seed


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def echo_config(command: str, settings: dict) -> None:
    print(f"# {command} " + json.dumps(settings, sort_keys=True, default=str), file=sys.stderr)


def _solver_config(tol: float) -> SolverConfig:
    try:
        return SolverConfig(tolerance=tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_threshold(args) -> int:
    if not 0.0 <= args.mu <= 1.0:
        raise UsageError("--mu must lie in [0, 1]")
    cfg = _solver_config(args.tol)
    echo_config("threshold", {"mu": args.mu, "ensemble": args.ensemble, "tol": cfg.tolerance,
                              "damping": cfg.damping, "max_iterations": cfg.max_iterations})
    try:
        if args.ensemble == "rotinv":
            sol = solve_rot_invariant_threshold(cfg)
        else:
            sol = solve_bi_orthogonal_threshold(args.mu, cfg)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"residual={fmt(exc.residual)}", file=sys.stderr)
        return EXIT_NUMERICAL
    record = {"mu": sol.mu, "ensemble": args.ensemble, "rho_critical": sol.rho_critical,
              "chi_hat_1": sol.chi_hat_1, "chi_hat_2": sol.chi_hat_2, "eta": sol.eta,
              "iterations": sol.iterations, "residual": sol.residual}
    print(fmt(sol.rho_critical))
    for key in ("chi_hat_1", "chi_hat_2", "eta", "residual"):
        print(f"{key}={fmt(record[key])}")
    print(f"iterations={sol.iterations}")
    if args.json:
        Path(args.json).write_text(json.dumps(record, indent=2) + "\n")
    return EXIT_OK


SWEEP_HEADER = ["mu", "rho_critical", "chi_hat_1", "chi_hat_2", "eta", "rho_rotinv", "status"]


def cmd_sweep(args) -> int:
    if args.grid_points < 2:
        raise UsageError("--grid-points must be at least 2")
    cfg = _solver_config(args.tol)
    echo_config("sweep", {"grid_points": args.grid_points, "tol": cfg.tolerance, "out": args.out})
    try:
        rotinv = fmt(solve_rot_invariant_threshold(cfg).rho_critical)
    except ConvergenceError:
        rotinv = "nan"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    failed = rotinv == "nan"
    for mu in np.linspace(0.0, 1.0, args.grid_points):
        try:
            s = solve_bi_orthogonal_threshold(float(mu), cfg)
            row = [fmt(v) for v in (mu, s.rho_critical, s.chi_hat_1, s.chi_hat_2, s.eta)] + [rotinv, "ok"]
        except ConvergenceError as exc:
            failed = True
            row = [fmt(mu)] + ["nan"] * 4 + [rotinv, f"nonconvergent residual={fmt(exc.residual)}"]
        writer.writerow(row)
    _emit(buf.getvalue(), args.out)
    return EXIT_NUMERICAL if failed else EXIT_OK


def _emit(text: str, out: str | None) -> None:
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    from .experiment import ExperimentConfig, persist_results, run_experiment

    seed = default_seed() if args.seed is None else args.seed
    try:
        config = ExperimentConfig(args.kind, args.mu, tuple(args.N_list), tuple(args.rho_list), args.trials,
                                  seed, args.recovery_tol, args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    echo_config("simulate", {**config.__dict__, "out": args.out})
    curves = run_experiment(config)
    persist_results(curves, [], args.out, config)
    flagged = [(c.N, p.rho) for c in curves for p in c.points if p.flagged]
    for c in curves:
        for p in c.points:
            print(f"N={c.N} rho={fmt(p.rho)} success_rate={fmt(p.success_rate)} "
                  f"({p.successes}/{p.trials}, lp_failures={p.lp_failures})")
    print(f"wrote {Path(args.out) / CURVES_FILE}")
    if flagged:
        print(f"error: {len(flagged)} point(s) exceed the LP failure limit: {flagged}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_extrapolate(args) -> int:
    from .experiment import EstimationError, extrapolate_curves, fits_to_csv, load_results, read_curves

    source = Path(args.input)
    echo_config("extrapolate", {"input": str(source), "out": args.out})
    try:
        if source.is_dir():
            curves, _, _ = load_results(source)
        else:
            curves = read_curves(source)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load curves from {source}: {exc}") from None
    groups: dict[tuple, list] = {}
    for c in curves:
        groups.setdefault((c.kind, c.mu), []).append(c)
    fits = []
    try:
        for key in sorted(groups):
            fits.append(extrapolate_curves(sorted(groups[key], key=lambda c: c.N)))
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in fits:
        print(f"kind={f.kind} mu={fmt(f.mu)} intercept={fmt(f.intercept)} stderr={fmt(f.intercept_stderr)}")
    out = args.out or (source / FIT_FILE if source.is_dir() else source.with_name(FIT_FILE))
    _emit(fits_to_csv(fits), str(out))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    echo_config("verify", {"suite": args.suite})
    checks = run_suite(args.suite)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="biortho", description="Basis pursuit thresholds for bi-orthogonal dictionaries.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("threshold", help="critical density from the replica fixed point")
    t.add_argument("--mu", type=float, default=1.0, help="block imbalance rho1/rho2 in [0, 1]")
    t.add_argument("--ensemble", choices=("biortho", "rotinv"), default="biortho")
    t.add_argument("--tol", type=float, default=SolverConfig().tolerance, help="fixed-point tolerance")
    t.add_argument("--json", metavar="PATH", help="also write the full solution as JSON")
    t.set_defaults(func=cmd_threshold)

    s = sub.add_parser("sweep", help="threshold over a uniform mu grid on [0, 1]")
    s.add_argument("--grid-points", type=int, default=11)
    s.add_argument("--tol", type=float, default=SolverConfig().tolerance)
    s.add_argument("--out", metavar="CSV", help="output file (stdout if omitted)")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("simulate", help="Monte Carlo success curves")
    m.add_argument("--mu", type=float, default=0.0)
    m.add_argument("--kind", choices=KINDS, default=KINDS[0])
    m.add_argument("--N-list", type=int_list, default=int_list("16:50:2"), help="e.g. 16,18 or 16:50:2")
    m.add_argument("--rho-list", type=parse_list, required=True, help="e.g. 0.2,0.25 or 0.16:0.34:0.02")
    m.add_argument("--trials", type=int, default=1000)
    m.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
    m.add_argument("--recovery-tol", type=float, default=1e-8, help="per-component MSE for success")
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", required=True, metavar="DIR")
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("extrapolate", help="per-N crossings and cubic fit in 1/N")
    e.add_argument("--in", dest="input", required=True, metavar="PATH", help="results directory or curves CSV")
    e.add_argument("--out", metavar="CSV", help=f"fit CSV (default: {FIT_FILE} next to the input)")
    e.set_defaults(func=cmd_extrapolate)

    v = sub.add_parser("verify", help="oracle cross-checks")
    v.add_argument("--suite", choices=SUITES, required=True)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"biortho {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
