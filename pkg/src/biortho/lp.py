"""Basis pursuit as a linear program, solved by a dense revised simplex.

``min ||x||_1  s.t.  D x = y`` becomes the standard-form LP

    min 1^T (x+, x-)   s.t.   [D, -D] (x+, x-) = y,   x+, x- >= 0.

Problem sizes here are tiny (at most a few dozen constraints), so the
solver keeps an explicit basis inverse and refactorizes it periodically.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

try:
    from numba import njit
except ImportError:  # pure-Python fallback, much slower
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

from .randmat import ProblemInstance

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
FEAS_TOL = 1e-9
REFACTOR_EVERY = 50
# consecutive degenerate pivots before switching to Bland's rule
BLAND_AFTER = 30


class LpError(RuntimeError):
    def __init__(self, message: str, status: str, seed=None):
        super().__init__(message if seed is None else f"{message} (instance seed {seed})")
        self.status = status
        self.seed = seed


@dataclass(frozen=True)
class StandardFormLP:
    """``min c^T x  s.t.  A x = b,  x >= 0``."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        m, n = A.shape
        if b.size != m or c.size != n:
            raise ValueError(f"inconsistent LP shapes: A {A.shape}, b {b.shape}, c {c.shape}")
        if m > n:
            raise ValueError("standard form needs at most as many rows as columns")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: np.ndarray | None
    objective: float
    pivots: int


def to_standard_form(instance: ProblemInstance) -> StandardFormLP:
    D, y = instance.D, instance.y
    if D.ndim != 2 or y.shape != (D.shape[0],):
        raise ValueError("dictionary and observation dimensions do not match")
    n = D.shape[1]
    return StandardFormLP(np.hstack([D, -D]), y, np.ones(2 * n))


_STATUS = {0: OPTIMAL, 1: INFEASIBLE, 2: UNBOUNDED, 3: ITERATION_LIMIT}


@njit(cache=True)
def _pivot(Binv, xB, basis, row, col, u, step):
    m = xB.shape[0]
    for i in range(m):
        xB[i] -= step * u[i]
    xB[row] = step
    piv = Binv[row] / u[row]
    for i in range(m):
        if i != row and u[i] != 0.0:
            Binv[i] -= u[i] * piv
    Binv[row] = piv
    basis[row] = col


@njit(cache=True)
def _refactor(A, b, basis, Binv, xB):
    m = basis.shape[0]
    B = np.empty((m, m))
    for k in range(m):
        B[:, k] = A[:, basis[k]]
    Binv[:, :] = np.linalg.inv(B)
    xB[:] = Binv @ b


@njit(cache=True)
def _run_simplex(A, b, c, basis, Binv, xB, n_allowed, max_pivots, pivots):
    """Primal simplex from a feasible basis over columns ``< n_allowed``.

    Returns ``(status code, pivots)``.  Dantzig pricing; after
    BLAND_AFTER consecutive degenerate pivots the entering column is the
    lowest-index improving one, which cannot cycle.
    """
    m = basis.shape[0]
    is_basic = np.zeros(A.shape[1], dtype=np.bool_)
    for k in range(m):
        is_basic[basis[k]] = True
    degenerate = 0
    since_refactor = 0
    u = np.empty(m)
    while True:
        cB = np.empty(m)
        for k in range(m):
            cB[k] = c[basis[k]]
        yA = (cB @ Binv) @ A
        j = -1
        best = -COST_TOL
        bland = degenerate >= BLAND_AFTER
        for col in range(n_allowed):
            if is_basic[col]:
                continue
            d = c[col] - yA[col]
            if d < best:
                j = col
                if bland:
                    break
                best = d
        if j < 0:
            return 0, pivots
        if pivots >= max_pivots:
            return 3, pivots
        u[:] = Binv @ np.ascontiguousarray(A[:, j])
        r = -1
        step = np.inf
        for i in range(m):
            if u[i] > PIVOT_TOL:
                ratio = max(xB[i], 0.0) / u[i]
                if r < 0 or ratio < step - PIVOT_TOL:
                    step = ratio
                    r = i
                elif ratio <= step + PIVOT_TOL and basis[i] < basis[r]:
                    # ties go to the smallest basic column index
                    r = i
        if r < 0:
            return 2, pivots
        step = max(xB[r], 0.0) / u[r]
        is_basic[basis[r]] = False
        is_basic[j] = True
        _pivot(Binv, xB, basis, r, j, u, step)
        pivots += 1
        if step <= PIVOT_TOL:
            degenerate += 1
        else:
            degenerate = 0
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            _refactor(A, b, basis, Binv, xB)
            since_refactor = 0


@njit(cache=True)
def _two_phase(A, b, c, max_pivots):
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    for i in range(m):
        if b[i] < 0.0:
            A[i] = -A[i]
            b[i] = -b[i]
    A1 = np.zeros((m, n + m))
    A1[:, :n] = A
    c1 = np.zeros(n + m)
    for i in range(m):
        A1[i, n + i] = 1.0
        c1[n + i] = 1.0
    basis = np.arange(n, n + m)
    Binv = np.eye(m)
    xB = b.copy()
    x = np.zeros(n)
    status, pivots = _run_simplex(A1, b, c1, basis, Binv, xB, n + m, max_pivots, 0)
    if status != 0:
        return status, x, pivots
    _refactor(A1, b, basis, Binv, xB)
    infeasibility = 0.0
    for k in range(m):
        if basis[k] >= n:
            infeasibility += xB[k]
    scale = 1.0
    for i in range(m):
        scale = max(scale, b[i])
    if infeasibility > FEAS_TOL * scale:
        return 1, x, pivots

    # pivot zero-level artificials out; rows where none can leave are redundant
    keep = np.ones(m, dtype=np.bool_)
    u = np.empty(m)
    for r in range(m):
        if basis[r] < n:
            continue
        row = Binv[r] @ A
        for k in range(m):
            if basis[k] < n:
                row[basis[k]] = 0.0
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > PIVOT_TOL:
            u[:] = Binv @ np.ascontiguousarray(A1[:, j])
            _pivot(Binv, xB, basis, r, j, u, 0.0)
            pivots += 1
        else:
            keep[r] = False

    m2 = int(keep.sum())
    A2 = np.empty((m2, n))
    b2 = np.empty(m2)
    basis2 = np.empty(m2, dtype=np.int64)
    k2 = 0
    for i in range(m):
        if keep[i]:
            A2[k2] = A[i]
            b2[k2] = b[i]
            basis2[k2] = basis[i]
            k2 += 1
    Binv2 = np.empty((m2, m2))
    xB2 = np.empty(m2)
    _refactor(A2, b2, basis2, Binv2, xB2)
    status, pivots = _run_simplex(A2, b2, c, basis2, Binv2, xB2, n, max_pivots, pivots)
    if status != 0:
        return status, x, pivots
    _refactor(A2, b2, basis2, Binv2, xB2)
    for k in range(m2):
        x[basis2[k]] = xB2[k]
    return 0, x, pivots


def simplex_solve(lp: StandardFormLP, max_pivots: int = 5000) -> LpSolution:
    """Two-phase revised simplex with an explicit basis inverse.

    Phase 1 minimizes the sum of artificial variables from the identity
    basis (rows are sign-flipped so ``b >= 0``).  Artificials left basic at
    zero are pivoted out; rows where that is impossible are linearly
    dependent and are dropped before phase 2.
    """
    code, x, pivots = _two_phase(lp.A, lp.b, lp.c, max_pivots)
    status = _STATUS[code]
    if status != OPTIMAL:
        objective = -np.inf if status == UNBOUNDED else np.nan
        return LpSolution(status, None, objective, pivots)
    x[(x < 0) & (x > -FEAS_TOL)] = 0.0
    return LpSolution(OPTIMAL, x, float(lp.c @ x), pivots)


def enumerate_vertices(lp: StandardFormLP, singular_tol: float = 1e-10) -> LpSolution:
    """Brute-force optimum over every basic feasible solution.

    Independent oracle for :func:`simplex_solve` at tiny sizes: all
    ``C(n, m)`` column subsets are tried.  Requires full row rank.
    """
    A, b, c = lp.A, lp.b, lp.c
    m, n = A.shape
    subsets = np.array(list(itertools.combinations(range(n), m)), dtype=int)
    best_obj, best_x = np.inf, None
    for chunk in np.array_split(subsets, max(1, len(subsets) // 20000)):
        B = A[:, chunk].transpose(1, 0, 2)
        ok = np.abs(np.linalg.det(B)) > singular_tol
        if not np.any(ok):
            continue
        idx = chunk[ok]
        xB = np.linalg.solve(B[ok], np.broadcast_to(b, (idx.shape[0], m))[..., None])[..., 0]
        feasible = np.all(xB >= -1e-10, axis=1)
        if not np.any(feasible):
            continue
        obj = np.einsum("ij,ij->i", c[idx[feasible]], xB[feasible])
        k = int(np.argmin(obj))
        if obj[k] < best_obj:
            best_obj = float(obj[k])
            best_x = np.zeros(n)
            best_x[idx[feasible][k]] = np.maximum(xB[feasible][k], 0.0)
    if best_x is None:
        return LpSolution(INFEASIBLE, None, np.nan, 0)
    return LpSolution(OPTIMAL, best_x, best_obj, 0)


def l1_reconstruct(instance: ProblemInstance, max_pivots: int = 5000) -> tuple[np.ndarray, float]:
    """Minimum-l1 solution of ``D x = y``; returns ``(x_hat, ||x_hat||_1)``."""
    lp = to_standard_form(instance)
    sol = simplex_solve(lp, max_pivots)
    if sol.status != OPTIMAL:
        raise LpError(f"basis pursuit LP ended with status {sol.status!r}", sol.status, instance.seed)
    n = instance.D.shape[1]
    x_hat = sol.x[:n] - sol.x[n:]
    return x_hat, float(np.sum(np.abs(x_hat)))


def check_recovery(x_hat: np.ndarray, x_planted: np.ndarray, tol: float = 1e-8) -> bool:
    """Per-component squared error at most ``tol``."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_planted = np.asarray(x_planted, dtype=float)
    if x_hat.shape != x_planted.shape:
        raise ValueError("estimate and planted signal differ in length")
    diff = x_hat - x_planted
    return bool(diff @ diff / diff.size <= tol)
