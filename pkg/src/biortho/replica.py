"""Replica-symmetric l1 recovery thresholds for bi-orthogonal dictionaries.

The threshold rho(mu) is the joint solution of four coupled equations in
``(chi_hat_1, eta, chi_hat_2, rho)``:

    (i)   chi_hat_1 = Qinv(1/4 - rho_1 (1/2 - Q(1/sqrt(chi_hat_1))))^-2
    (ii)  eta       = 2 rho_1 (1 + chi_hat_1 + 2 r(chi_hat_1)) - 4 r(chi_hat_1) - chi_hat_1
    (iii) chi_hat_2 = 2 rho_2 (1 + chi_hat_2 + 2 r(chi_hat_2)) - 4 r(chi_hat_2) + eta
    (iv)  rho       = (1 + mu) (1/2 - 2 Q(1/sqrt(chi_hat_2))) / (2 - 4 Q(1/sqrt(chi_hat_2)))

with block densities ``rho_1 = 2 mu rho / (1 + mu)`` and
``rho_2 = 2 rho / (1 + mu)``.  ``eta`` is the Lagrange multiplier that
keeps the two block susceptibilities equal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .specfun import phi_average, q_function, q_inverse, r_func

QINV_CLAMP = 1e-12
CHI_HAT_FLOOR = 1e-6
RHO_MARGIN = 1e-9


class ConvergenceError(RuntimeError):
    """Fixed-point iteration failed; carries the last residual."""

    def __init__(self, message: str, residual: float, mu: float | None = None):
        super().__init__(message)
        self.residual = residual
        self.mu = mu


def block_densities(mu: float, rho: float) -> tuple[float, float]:
    """Per-block densities ``(rho_1, rho_2)`` with ``rho_1 = mu * rho_2``."""
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu!r}")
    if not 0.0 < rho <= 0.5:
        raise ValueError(f"rho must lie in (0, 1/2], got {rho!r}")
    return 2.0 * mu * rho / (1.0 + mu), 2.0 * rho / (1.0 + mu)


@dataclass(frozen=True)
class SparsityProfile:
    mu: float
    rho: float
    rho1: float = field(init=False)
    rho2: float = field(init=False)

    def __post_init__(self):
        rho1, rho2 = block_densities(self.mu, self.rho)
        object.__setattr__(self, "rho1", rho1)
        object.__setattr__(self, "rho2", rho2)


@dataclass(frozen=True)
class BlockParameters:
    """Order parameters of one block and their conjugates."""

    Q: float
    chi: float
    m: float
    Q_hat: float
    chi_hat: float
    m_hat: float


@dataclass(frozen=True)
class OrderParameters:
    block1: BlockParameters
    block2: BlockParameters
    eta: float = 0.0


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-12
    max_iterations: int = 100_000
    # the undamped map has eigenvalues 0.77 +- 1.10i at mu = 1, so the
    # damped iteration is only stable for damping below ~0.36
    damping: float = 0.2

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class ReplicaSolution:
    profile: SparsityProfile
    chi_hat_1: float
    chi_hat_2: float
    eta: float
    rho_critical: float
    iterations: int
    residual: float

    @property
    def mu(self) -> float:
        return self.profile.mu


def evaluate_T(theta: BlockParameters, rho_i: float) -> float:
    """Closed form of the per-block free-energy term ``T(Theta_i)``."""
    if theta.chi <= 0 or theta.Q_hat <= 0:
        raise ValueError("evaluate_T requires chi > 0 and Q_hat > 0")
    if theta.chi_hat < 0:
        raise ValueError("evaluate_T requires chi_hat >= 0")
    return (
        _bilinear_T(theta, rho_i)
        + (1.0 - rho_i) / theta.Q_hat * r_func(theta.chi_hat)
        + rho_i / theta.Q_hat * r_func(theta.m_hat**2 + theta.chi_hat)
    )


def evaluate_T_quadrature(theta: BlockParameters, rho_i: float) -> float:
    """``T(Theta_i)`` with the Gaussian averages done by quadrature."""
    if theta.chi <= 0 or theta.Q_hat <= 0:
        raise ValueError("evaluate_T requires chi > 0 and Q_hat > 0")
    noise = phi_average(math.sqrt(theta.chi_hat), theta.Q_hat)
    signal = phi_average(math.sqrt(theta.m_hat**2 + theta.chi_hat), theta.Q_hat)
    return _bilinear_T(theta, rho_i) + (1.0 - rho_i) * noise + rho_i * signal


def _bilinear_T(theta: BlockParameters, rho_i: float) -> float:
    return (
        (rho_i - 2.0 * theta.m + theta.Q) / (4.0 * theta.chi)
        - theta.Q * theta.Q_hat / 2.0
        + theta.chi * theta.chi_hat / 2.0
        + theta.m * theta.m_hat
    )


def _q_of_chi_hat(chi_hat: float) -> float:
    return q_function(1.0 / math.sqrt(chi_hat))


def _clamped_q_inverse(arg: float) -> tuple[float, bool]:
    clamped = not QINV_CLAMP <= arg <= 0.5 - QINV_CLAMP
    arg = min(max(arg, QINV_CLAMP), 0.5 - QINV_CLAMP)
    return q_inverse(arg), clamped


def _rho_from_tail(q2: float, mu: float) -> float:
    # pole at q2 = 1/2 (chi_hat_2 -> infinity); the numerator is negative there
    if q2 >= 0.5:
        return -math.inf
    return (1.0 + mu) * (0.5 - 2.0 * q2) / (2.0 - 4.0 * q2)


def _rhs(state, mu: float) -> tuple[np.ndarray, bool]:
    """Right-hand sides of (i)-(iv); second value flags an active Q^-1 clamp."""
    chi1, eta, chi2, rho = (float(v) for v in state)
    rho1 = 2.0 * mu * rho / (1.0 + mu)
    rho2 = 2.0 * rho / (1.0 + mu)
    t1, clamped = _clamped_q_inverse(0.25 - rho1 * (0.5 - _q_of_chi_hat(chi1)))
    r1 = r_func(chi1)
    r2 = r_func(chi2)
    return np.array([
        t1**-2,
        2.0 * rho1 * (1.0 + chi1 + 2.0 * r1) - 4.0 * r1 - chi1,
        2.0 * rho2 * (1.0 + chi2 + 2.0 * r2) - 4.0 * r2 + eta,
        _rho_from_tail(_q_of_chi_hat(chi2), mu),
    ]), clamped


def main_result_defects(chi_hat_1, eta, chi_hat_2, rho, mu) -> np.ndarray:
    """``RHS - LHS`` of the four coupled equations at a candidate point."""
    state = np.array([chi_hat_1, eta, chi_hat_2, rho], dtype=float)
    rhs, _ = _rhs(state, mu)
    return rhs - state


def _project(target: np.ndarray, rho_max: float) -> tuple[np.ndarray, bool]:
    """Clip the targets onto ``chi_hat > 0`` and ``0 < rho < rho_max``."""
    lo = np.array([CHI_HAT_FLOOR, -np.inf, CHI_HAT_FLOOR, RHO_MARGIN])
    hi = np.array([np.inf, np.inf, np.inf, rho_max - RHO_MARGIN])
    clipped = np.clip(np.nan_to_num(target, nan=RHO_MARGIN), lo, hi)
    return clipped, bool(np.any(clipped != target))


def _iterate(state: np.ndarray, step_map, cfg: SolverConfig, rho_max: float, mu: float):
    """Projected damped substitution ``x <- (1 - d) x + d P(F(x))``.

    ``P`` clips transient iterates back into the domain where every
    equation is defined.  A clip or clamp still active once the residual
    is below tolerance means there is no interior fixed point.
    """
    d = cfg.damping
    residual = math.inf
    for it in range(1, cfg.max_iterations + 1):
        raw, clamped = step_map(state)
        target, projected = _project(raw, rho_max)
        residual = float(np.max(np.abs(target - state)))
        if residual <= cfg.tolerance:
            if clamped or projected:
                raise ConvergenceError(
                    f"fixed point lies on the domain boundary (mu={mu})", residual, mu)
            return state, it, residual
        state = (1.0 - d) * state + d * target
    raise ConvergenceError(
        f"no convergence within {cfg.max_iterations} iterations (mu={mu}), "
        f"residual {residual:.3e}", residual, mu)


def solve_bi_orthogonal_threshold(
    mu: float,
    cfg: SolverConfig | None = None,
    initial_chi_hat: float = 1.0,
) -> ReplicaSolution:
    """Critical density rho(mu) for the bi-orthogonal dictionary ``[O1 O2]``."""
    cfg = cfg or SolverConfig()
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu!r}")
    start = np.array([initial_chi_hat, 0.0, initial_chi_hat, 0.2])
    state, iterations, residual = _iterate(start, lambda s: _rhs(s, mu), cfg, (1.0 + mu) / 4.0, mu)
    chi1, eta, chi2, rho = (float(v) for v in state)
    return ReplicaSolution(SparsityProfile(mu, rho), chi1, chi2, eta, rho, iterations, residual)


def solve_rot_invariant_threshold(
    cfg: SolverConfig | None = None,
    initial_chi_hat: float = 1.0,
) -> ReplicaSolution:
    """Threshold for rotationally invariant dictionaries.

    Uniform block densities reduce the system to a single ``chi_hat`` with
    ``eta = 0``: equation (i) at ``rho_1 = rho`` and equation (iii) solved
    for ``rho``.  The result does not depend on ``mu``.
    """
    cfg = cfg or SolverConfig()

    def step_map(s):
        chi, rho = float(s[0]), float(s[3])
        t, clamped = _clamped_q_inverse(0.25 - rho * (0.5 - _q_of_chi_hat(chi)))
        new_chi = t**-2
        r = r_func(chi)
        new_rho = (chi + 4.0 * r) / (2.0 * (1.0 + chi + 2.0 * r))
        return np.array([new_chi, 0.0, new_chi, new_rho]), clamped

    start = np.array([initial_chi_hat, 0.0, initial_chi_hat, 0.2])
    state, iterations, residual = _iterate(start, step_map, cfg, 0.5, 1.0)
    chi, _, _, rho = (float(v) for v in state)
    return ReplicaSolution(SparsityProfile(1.0, rho), chi, chi, 0.0, rho, iterations, residual)


def sweep_mu(grid: Sequence[float], cfg: SolverConfig | None = None) -> list[ReplicaSolution]:
    """Solve the bi-orthogonal threshold at every ``mu`` in ``grid``."""
    out = []
    for mu in grid:
        try:
            out.append(solve_bi_orthogonal_threshold(float(mu), cfg))
        except ConvergenceError as exc:
            raise ConvergenceError(f"sweep failed at mu={mu}: {exc}", exc.residual, float(mu)) from exc
    return out


# -- independent oracle -------------------------------------------------------

def _bisect_tail_argument(g) -> float:
    # roots are sought in t = 1/sqrt(chi_hat)
    from scipy.optimize import bisect

    return bisect(g, 1e-9, 40.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def threshold_by_bisection(mu: float, xtol: float = 1e-15) -> ReplicaSolution:
    """Nested-bisection solution of the same four equations.

    Uses neither ``q_inverse`` nor the damped iteration.  For a trial
    ``rho``: (i) is solved for ``chi_hat_1`` by bisection, (ii) gives
    ``eta``, (iv) is solved for ``chi_hat_2`` by bisection, and the defect
    of (iii) is bisected over ``rho`` in ``(0, (1 + mu)/4)``.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu!r}")

    def inner(rho):
        rho1 = 2.0 * mu * rho / (1.0 + mu)
        rho2 = 2.0 * rho / (1.0 + mu)
        t1 = _bisect_tail_argument(lambda t: q_function(t) - 0.25 + rho1 * (0.5 - q_function(t)))
        chi1 = t1**-2
        r1 = r_func(chi1)
        eta = 2.0 * rho1 * (1.0 + chi1 + 2.0 * r1) - 4.0 * r1 - chi1
        t2 = _bisect_tail_argument(
            lambda t: (1.0 + mu) * (0.5 - 2.0 * q_function(t)) / (2.0 - 4.0 * q_function(t)) - rho)
        chi2 = t2**-2
        r2 = r_func(chi2)
        defect = 2.0 * rho2 * (1.0 + chi2 + 2.0 * r2) - 4.0 * r2 + eta - chi2
        return defect, chi1, eta, chi2

    from scipy.optimize import bisect

    hi = (1.0 + mu) / 4.0 - 1e-9
    rho = bisect(lambda x: inner(x)[0], 1e-3, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    _, chi1, eta, chi2 = inner(rho)
    residual = float(np.max(np.abs(main_result_defects(chi1, eta, chi2, rho, mu))))
    return ReplicaSolution(SparsityProfile(mu, rho), chi1, chi2, eta, rho, 0, residual)

