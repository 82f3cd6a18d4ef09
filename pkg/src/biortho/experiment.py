"""Monte Carlo phase-transition experiments for basis pursuit.

Pipeline: success counts per ``(N, rho)`` point, a per-N critical density
from a logistic fit, and a weighted cubic extrapolation in ``1/N`` to the
large-system limit.  Trial ``t`` of point ``(N, rho_index)`` draws from its
own stream keyed by ``(seed, N, rho_index, t)``, so counts do not depend on
execution order or on the number of worker processes.
"""
from __future__ import annotations

import csv
import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .lp import LpError, check_recovery, l1_reconstruct
from .randmat import KINDS, build_instance
from .replica import SparsityProfile

# a point with more LP failures than this fraction of its trials is invalid
MAX_LP_FAILURE_RATE = 1e-3
CURVES_FILE = "curves.csv"
FIT_FILE = "fit.csv"
MANIFEST_FILE = "manifest.json"
CURVE_HEADER = ["kind", "mu", "N", "rho", "trials", "successes", "success_rate"]
FIT_HEADER = ["kind", "mu", "abscissa", "rho_c", "stderr"]


class EstimationError(ValueError):
    """A success curve or a set of critical densities cannot be fitted."""


def fmt(x: float) -> str:
    """Shortest-safe 17-significant-digit text for a float."""
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    mu: float
    N_values: tuple[int, ...]
    rho_values: tuple[float, ...]
    trials: int
    seed: int = 0
    tol: float = 1e-8
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "N_values", tuple(int(n) for n in self.N_values))
        object.__setattr__(self, "rho_values", tuple(float(r) for r in self.rho_values))
        if self.kind not in KINDS:
            raise ValueError(f"unknown dictionary kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu!r}")
        if not self.N_values or any(n < 4 or n % 2 for n in self.N_values):
            raise ValueError("every N must be even and at least 4")
        if not self.rho_values or any(not 0.0 < r < 0.5 for r in self.rho_values):
            raise ValueError("every rho must lie in (0, 1/2)")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not self.tol > 0:
            raise ValueError("recovery tolerance must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True)
class CurvePoint:
    rho: float
    successes: int
    trials: int
    lp_failures: int = 0

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    @property
    def flagged(self) -> bool:
        return self.lp_failures > MAX_LP_FAILURE_RATE * self.trials


@dataclass(frozen=True)
class SuccessCurve:
    kind: str
    mu: float
    N: int
    points: tuple[CurvePoint, ...]

    @property
    def rho(self) -> np.ndarray:
        return np.array([p.rho for p in self.points])

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.success_rate for p in self.points])


def _count(args) -> tuple[int, int]:
    kind, mu, N, rho, rho_index, seed, tol, start, stop = args
    profile = SparsityProfile(mu, rho)
    successes = failures = 0
    for t in range(start, stop):
        inst = build_instance(N // 2, profile, kind, (seed, N, rho_index, t))
        try:
            x_hat, _ = l1_reconstruct(inst)
        except LpError:
            failures += 1
            continue
        successes += check_recovery(x_hat, inst.x, tol)
    return successes, failures


def _chunks(start: int, stop: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(start, stop, parts + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_trials(config: ExperimentConfig, N: int, rho_index: int,
               start: int = 0, stop: int | None = None) -> CurvePoint:
    """Tally trials ``start <= t < stop`` (default: all) at one grid point.

    Counts over disjoint trial ranges add up to the count over their union.
    """
    stop = config.trials if stop is None else stop
    if not 0 <= start < stop:
        raise ValueError("trial range must be non-empty")
    rho = config.rho_values[rho_index]
    jobs = [(config.kind, config.mu, N, rho, rho_index, config.seed, config.tol, a, b)
            for a, b in _chunks(start, stop, config.workers)]
    if config.workers == 1:
        results = [_count(j) for j in jobs]
    else:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_count, jobs))
    return CurvePoint(rho, sum(r[0] for r in results), stop - start, sum(r[1] for r in results))


def success_curve(config: ExperimentConfig, N: int) -> SuccessCurve:
    points = tuple(run_trials(config, N, i) for i in range(len(config.rho_values)))
    return SuccessCurve(config.kind, config.mu, N, points)


def run_experiment(config: ExperimentConfig) -> list[SuccessCurve]:
    return [success_curve(config, N) for N in config.N_values]


def merge_curves(a: SuccessCurve, b: SuccessCurve) -> SuccessCurve:
    """Add the counts of two runs over the same grid."""
    if (a.kind, a.mu, a.N) != (b.kind, b.mu, b.N) or [p.rho for p in a.points] != [p.rho for p in b.points]:
        raise ValueError("curves cover different grids")
    return SuccessCurve(a.kind, a.mu, a.N, tuple(
        CurvePoint(p.rho, p.successes + q.successes, p.trials + q.trials, p.lp_failures + q.lp_failures)
        for p, q in zip(a.points, b.points)))


@dataclass(frozen=True)
class LogisticFit:
    """``logit(rate) = b0 + b1 rho``; ``rho_c = -b0 / b1``."""

    rho_c: float
    stderr: float
    slope: float
    separated: bool = False


def fit_logistic(curve: SuccessCurve, max_iter: int = 100) -> LogisticFit:
    """Binomial maximum-likelihood logistic fit with a delta-method stderr.

    Separated data (rates 0 or 1 on either side of at most one
    intermediate point) has no finite MLE; the crossing then falls back to
    linear interpolation between the two points bracketing 1/2, with half
    their spacing as the stderr.
    """
    rho, rates = curve.rho, curve.rates
    n = np.array([p.trials for p in curve.points], dtype=float)
    k = np.array([p.successes for p in curve.points], dtype=float)
    if not (np.any(rates > 0.5) and np.any(rates < 0.5)):
        raise EstimationError(f"success curve at N={curve.N} does not bracket 1/2; widen the rho grid")
    order = np.argsort(rho)
    rho, rates, n, k = rho[order], rates[order], n[order], k[order]
    if _separated(rates):
        return _interpolated_crossing(rho, rates)

    X = np.column_stack([np.ones_like(rho), rho])

    def loglik(beta):
        eta = X @ beta
        return float(np.sum(k * eta - n * np.logaddexp(0.0, eta)))

    # start from weighted least squares on continuity-corrected empirical logits
    emp = np.log((k + 0.5) / (n - k + 0.5))
    w0 = (k + 0.5) * (n - k + 0.5) / (n + 1.0)
    beta = np.linalg.lstsq(X * np.sqrt(w0)[:, None], emp * np.sqrt(w0), rcond=None)[0]
    ll = loglik(beta)
    try:
        for _ in range(max_iter):
            p = expit(X @ beta)
            info = X.T @ ((n * p * (1 - p))[:, None] * X)
            step = np.linalg.solve(info, X.T @ (k - n * p))
            # Newton with step halving: the log-likelihood never decreases
            t = 1.0
            while loglik(beta + t * step) < ll - 1e-12 * abs(ll) and t > 1e-10:
                t *= 0.5
            beta = beta + t * step
            ll = loglik(beta)
            if np.max(np.abs(t * step)) <= 1e-12 * (1 + np.max(np.abs(beta))):
                break
        else:
            raise EstimationError(f"logistic fit at N={curve.N} did not converge")
        p = expit(X @ beta)
        cov = np.linalg.inv(X.T @ ((n * p * (1 - p))[:, None] * X))
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"logistic fit at N={curve.N} is degenerate: {exc}") from exc
    b0, b1 = beta
    if not b1 < 0:
        raise EstimationError(f"success curve at N={curve.N} increases with rho")
    rho_c = -b0 / b1
    grad = np.array([-1.0 / b1, b0 / b1**2])
    return LogisticFit(float(rho_c), float(math.sqrt(grad @ cov @ grad)), float(b1))


def _separated(rates: np.ndarray) -> bool:
    """True when ordered rates are ones then zeros (or the reverse) except at one point."""
    inner = np.flatnonzero((rates > 0) & (rates < 1))
    if inner.size > 1:
        return False
    cut = inner[0] if inner.size else int(np.argmax(rates != rates[0]))
    left, right = rates[:cut], rates[cut + inner.size:] if inner.size else rates[cut:]
    if np.unique(left).size > 1 or np.unique(right).size > 1:
        return False
    return bool(left.size == 0 or right.size == 0 or left[0] != right[0])


def _interpolated_crossing(rho: np.ndarray, rates: np.ndarray) -> LogisticFit:
    above = np.flatnonzero(rates > 0.5)
    below = np.flatnonzero(rates < 0.5)
    if below[0] < above[-1]:
        raise EstimationError("success curve increases with rho")
    i, j = above[-1], below[0]
    t = (rates[i] - 0.5) / (rates[i] - rates[j])
    rho_c = rho[i] + t * (rho[j] - rho[i])
    return LogisticFit(float(rho_c), float((rho[j] - rho[i]) / 2), -math.inf, separated=True)


def critical_density_estimate(curve: SuccessCurve) -> tuple[float, float]:
    """50% crossing of the fitted success curve and its standard error."""
    fit = fit_logistic(curve)
    return fit.rho_c, fit.stderr


@dataclass(frozen=True)
class ExtrapolationFit:
    kind: str
    mu: float
    N: tuple[int, ...]
    abscissa: tuple[float, ...]
    rho_c: tuple[float, ...]
    stderr: tuple[float, ...]
    coeffs: tuple[float, ...]
    intercept_stderr: float
    residual_norm: float

    @property
    def intercept(self) -> float:
        return self.coeffs[0]


def finite_size_extrapolate(points: Sequence[tuple[int, float, float]], degree: int = 3,
                            kind: str = "", mu: float = float("nan")) -> ExtrapolationFit:
    """Weighted least-squares polynomial in ``x = 1/N``; the intercept is the ``N -> inf`` limit.

    Weights are ``1/stderr^2`` (unweighted if any stderr is zero).  The
    intercept standard error is scaled up by the reduced chi-square when
    that exceeds one.
    """
    pts = sorted((int(N), float(r), float(s)) for N, r, s in points)
    Ns = np.array([p[0] for p in pts])
    if len(set(Ns.tolist())) < max(5, degree + 2):
        raise EstimationError(f"need at least {max(5, degree + 2)} distinct N values, got {len(set(Ns.tolist()))}")
    x = 1.0 / Ns
    y = np.array([p[1] for p in pts])
    se = np.array([p[2] for p in pts])
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(se)) and np.all(se >= 0)):
        raise EstimationError("critical densities and stderrs must be finite")
    w = np.ones_like(y) if np.any(se == 0) else 1.0 / se**2
    V = np.vander(x, degree + 1, increasing=True)
    sw = np.sqrt(w)
    # scaling columns to unit norm keeps the 1/N^3 column well conditioned
    A = V * sw[:, None]
    col = np.linalg.norm(A, axis=0)
    coef_s, _, rank, _ = np.linalg.lstsq(A / col, y * sw, rcond=None)
    if rank < degree + 1:
        raise EstimationError("extrapolation design is rank deficient")
    coeffs = coef_s / col
    resid = y - V @ coeffs
    dof = len(y) - degree - 1
    chi2 = float(np.sum(w * resid**2))
    cov = np.linalg.inv(V.T @ (w[:, None] * V))
    if not np.any(se == 0):
        cov = cov * max(1.0, chi2 / dof)
    else:
        cov = cov * chi2 / dof
    intercept = float(coeffs[0])
    if not (np.all(np.isfinite(resid)) and 0.0 <= intercept <= 0.5):
        raise EstimationError(f"extrapolated intercept {intercept!r} is outside [0, 1/2]")
    return ExtrapolationFit(kind, float(mu), tuple(int(n) for n in Ns), tuple(x.tolist()), tuple(y.tolist()),
                            tuple(se.tolist()), tuple(float(c) for c in coeffs),
                            float(math.sqrt(max(cov[0, 0], 0.0))), float(np.linalg.norm(resid)))


def extrapolate_curves(curves: Sequence[SuccessCurve]) -> ExtrapolationFit:
    """Critical density per curve, then the cubic extrapolation."""
    kinds = {(c.kind, c.mu) for c in curves}
    if len(kinds) != 1:
        raise ValueError("curves mix dictionary kinds or mu values")
    (kind, mu), = kinds
    pts = [(c.N, *critical_density_estimate(c)) for c in curves]
    return finite_size_extrapolate(pts, kind=kind, mu=mu)


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def curves_to_csv(curves: Sequence[SuccessCurve]) -> str:
    lines = [",".join(CURVE_HEADER)]
    for c in curves:
        for p in c.points:
            lines.append(",".join([c.kind, fmt(c.mu), str(c.N), fmt(p.rho), str(p.trials),
                                   str(p.successes), fmt(p.success_rate)]))
    return "\n".join(lines) + "\n"


def fits_to_csv(fits: Sequence[ExtrapolationFit]) -> str:
    lines = [",".join(FIT_HEADER)]
    for f in fits:
        for x, r, s in zip(f.abscissa, f.rho_c, f.stderr):
            lines.append(",".join([f.kind, fmt(f.mu), fmt(x), fmt(r), fmt(s)]))
        lines.append(f"# intercept={fmt(f.intercept)} coeffs={','.join(fmt(c) for c in f.coeffs)}"
                     f" intercept_stderr={fmt(f.intercept_stderr)} residual_norm={fmt(f.residual_norm)}")
    return "\n".join(lines) + "\n"


def manifest(curves: Sequence[SuccessCurve], config: ExperimentConfig | None = None) -> dict:
    import scipy

    from . import __version__

    try:
        import numba
        numba_version = numba.__version__
    except ImportError:
        numba_version = None

    out = {}
    if config is not None:
        out["config"] = asdict(config)
        out["seed"] = config.seed
    out["lp_failures"] = [
        {"kind": c.kind, "mu": c.mu, "N": c.N, "rho": p.rho, "lp_failures": p.lp_failures, "flagged": p.flagged}
        for c in curves for p in c.points]
    out["flagged_points"] = sum(p.flagged for c in curves for p in c.points)
    out["versions"] = {"biortho": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                       "numba": numba_version, "python": platform.python_version()}
    return out


def persist_results(curves: Sequence[SuccessCurve], fits: Sequence[ExtrapolationFit], path: str | os.PathLike,
                    config: ExperimentConfig | None = None) -> list[Path]:
    """Write ``curves.csv``, ``fit.csv`` (if any fits) and ``manifest.json`` under ``path``."""
    root = Path(path)
    written = [root / CURVES_FILE]
    _write(written[0], curves_to_csv(curves))
    if fits:
        written.append(root / FIT_FILE)
        _write(written[-1], fits_to_csv(fits))
    written.append(root / MANIFEST_FILE)
    _write(written[-1], json.dumps(manifest(curves, config), indent=2, sort_keys=True) + "\n")
    return written


def read_curves(path: str | os.PathLike, lp_failures: dict | None = None) -> list[SuccessCurve]:
    """Parse a curves CSV; LP-failure counts come from the manifest when given."""
    lp_failures = lp_failures or {}
    groups: dict[tuple, list[CurvePoint]] = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            if next(reader) != CURVE_HEADER:
                raise ValueError(f"{path}: unexpected header")
            for row in reader:
                kind, mu, N, rho, trials, successes, _ = row
                key = (kind, float(mu), int(N))
                pt = CurvePoint(float(rho), int(successes), int(trials),
                                lp_failures.get((*key, float(rho)), 0))
                groups.setdefault(key, []).append(pt)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    return [SuccessCurve(k, mu, N, tuple(pts)) for (k, mu, N), pts in groups.items()]


def read_fits(path: str | os.PathLike) -> list[ExtrapolationFit]:
    fits, rows = [], []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if lines[0].split(",") != FIT_HEADER:
        raise ValueError(f"{path}: unexpected header")
    for line in lines[1:]:
        if line.startswith("#"):
            meta = dict(tok.split("=", 1) for tok in line[1:].split())
            coeffs = tuple(float(v) for v in meta["coeffs"].split(","))
            if float(meta["intercept"]) != coeffs[0]:
                raise ValueError(f"{path}: intercept does not match coeffs")
            fits.append(ExtrapolationFit(
                rows[0][0], float(rows[0][1]), tuple(round(1 / float(r[2])) for r in rows),
                tuple(float(r[2]) for r in rows), tuple(float(r[3]) for r in rows),
                tuple(float(r[4]) for r in rows), coeffs,
                float(meta["intercept_stderr"]), float(meta["residual_norm"])))
            rows = []
        elif line:
            rows.append(line.split(","))
    return fits


def load_results(path: str | os.PathLike) -> tuple[list[SuccessCurve], list[ExtrapolationFit], dict]:
    root = Path(path)
    with open(root / MANIFEST_FILE) as fh:
        man = json.load(fh)
    failures = {(e["kind"], float(e["mu"]), int(e["N"]), float(e["rho"])): e["lp_failures"]
                for e in man["lp_failures"]}
    curves = read_curves(root / CURVES_FILE, failures)
    fits = read_fits(root / FIT_FILE) if (root / FIT_FILE).exists() else []
    return curves, fits, man
