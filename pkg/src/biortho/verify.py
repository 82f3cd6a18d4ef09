"""Cross-checks of each module against an independent oracle.

Each suite returns a list of :class:`Check` records; the command line
``verify`` subcommand prints them and fails if any is out of tolerance.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .haarint import f_haar, i_m_quadrature
from .lp import OPTIMAL, enumerate_vertices, simplex_solve, to_standard_form
from .randmat import BI_ORTHOGONAL, IID_GAUSSIAN, build_instance, make_stream
from .replica import SparsityProfile, solve_bi_orthogonal_threshold, threshold_by_bisection
from .specfun import integrate_gaussian, phi, r_func, split_gaussian_rule

SUITES = ("specfun", "haarint", "replica", "lp")


@dataclass(frozen=True)
class Check:
    name: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.tolerance)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: max deviation {self.deviation:.3e} (tolerance {self.tolerance:.1e})"


def identity_gap(rho: float, chi_hat: float, m_hat: float, q_hat: float) -> float:
    """Quadrature of the averaged soft-threshold minimum minus its closed form."""
    s0, s1 = math.sqrt(chi_hat), math.sqrt(m_hat * m_hat + chi_hat)
    kinks = [k for s in (s0, s1) if s > 0 for k in (-1 / s, 1 / s)]
    rule = split_gaussian_rule(kinks)
    quad = integrate_gaussian(
        lambda z: (1 - rho) * phi(z * s0, q_hat)[0] + rho * phi(z * s1, q_hat)[0], rule)
    closed = ((1 - rho) * r_func(chi_hat) + rho * r_func(m_hat * m_hat + chi_hat)) / q_hat
    return abs(quad - closed)


def verify_specfun(draws: int = 100, seed: int = 0) -> list[Check]:
    rng = make_stream(seed, 5)
    gaps = [identity_gap(rng.uniform(0, 1), rng.uniform(0.01, 10), rng.uniform(0, 3), rng.uniform(0.1, 10))
            for _ in range(draws)]
    return [Check(f"integral identity on {draws} random draws", max(gaps), 1e-8)]


def verify_haarint(sizes=(100, 200, 400), grid=(0.5, 1.0, 2.0)) -> list[Check]:
    """Finite-M quadrature against the closed form; the gap must fall with M."""
    worst_ratio, worst_increase = 0.0, -math.inf
    for r1, r2, c in itertools.product(grid, grid, grid):
        gaps = [abs(i_m_quadrature(M, r1, r2, c) - f_haar(r1, r2, c)) for M in sizes]
        worst_ratio = max(worst_ratio, max(g * M for g, M in zip(gaps, sizes)))
        worst_increase = max(worst_increase, max(b - a for a, b in zip(gaps, gaps[1:])))
    return [Check(f"M * |I_M - F| on the {len(grid)}^3 grid, M in {tuple(sizes)}", worst_ratio, 10.0),
            Check("gap change between successive M (must be negative)", worst_increase, 0.0)]


def verify_replica(mus=(0.0, 0.25, 0.5, 0.75, 1.0)) -> list[Check]:
    dev = 0.0
    for mu in mus:
        a, b = solve_bi_orthogonal_threshold(mu), threshold_by_bisection(mu)
        dev = max(dev, abs(a.rho_critical - b.rho_critical), abs(a.chi_hat_1 - b.chi_hat_1),
                  abs(a.chi_hat_2 - b.chi_hat_2), abs(a.eta - b.eta))
    return [Check(f"damped iteration vs nested bisection at {len(mus)} mu values", dev, 1e-8)]


def verify_lp(instances: int = 100, seed: int = 0) -> list[Check]:
    """Simplex vs exhaustive vertex enumeration on tiny instances (M <= 6)."""
    obj_gap = feas = bound = 0.0
    failures = 0
    for i in range(instances):
        M = 3 + i % 4
        kind = (BI_ORTHOGONAL, IID_GAUSSIAN)[i % 2]
        inst = build_instance(M, SparsityProfile(0.5, 0.3), kind, (seed, 6, i))
        lp = to_standard_form(inst)
        sol, ref = simplex_solve(lp), enumerate_vertices(lp)
        if sol.status != OPTIMAL:
            failures += 1
            continue
        n = inst.D.shape[1]
        x_hat = sol.x[:n] - sol.x[n:]
        obj_gap = max(obj_gap, abs(sol.objective - ref.objective))
        feas = max(feas, float(np.max(np.abs(inst.D @ x_hat - inst.y))))
        bound = max(bound, sol.objective - float(np.abs(inst.x).sum()))
    return [Check(f"simplex vs vertex enumeration on {instances} instances", obj_gap, 1e-9),
            Check("equality residual of returned solutions", feas, 1e-8),
            Check("objective minus planted l1 norm", bound, 1e-9),
            Check("non-optimal simplex exits", float(failures), 0.0)]


def run_suite(name: str) -> list[Check]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    return {"specfun": verify_specfun, "haarint": verify_haarint,
            "replica": verify_replica, "lp": verify_lp}[name]()
