"""Scalar special functions for the l1-recovery free energy.

All integrals are taken against the standard Gaussian measure

    Dz = (2 pi)^(-1/2) exp(-z^2 / 2) dz,

and every function here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

_leggauss = lru_cache(maxsize=8)(leggauss)

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

# below this the exp(-1/(2h)) factor in r(h) underflows
R_FUNC_ZERO_BELOW = 1e-8
DEFAULT_HERMITE_NODES = 96


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 else out


def _special():
    # deferred: scipy.special costs ~0.3 s to import and the scalar
    # paths used by the fixed-point solver rarely need it
    import scipy.special

    return scipy.special


def q_function(x):
    """Upper Gaussian tail ``Q(x) = P(Z > x)``.

    Accepts scalars or arrays.  For ``x > 6`` the scaled complementary
    error function is used so the tail keeps full relative precision.
    """
    if isinstance(x, (float, int)):
        t = x / SQRT2
        if x > 6.0:
            return 0.5 * float(_special().erfcx(t)) * math.exp(-t * t)
        return 0.5 * math.erfc(t)
    x = np.asarray(x, dtype=float)
    t = x / SQRT2
    sp = _special()
    with np.errstate(over="ignore", under="ignore"):
        out = np.where(x > 6.0, 0.5 * sp.erfcx(t) * np.exp(-t * t), 0.5 * sp.erfc(t))
    return _scalar_or_array(out, x)


def q_inverse(p: float, tol: float = 1e-13, max_iter: int = 200) -> float:
    """Functional inverse of :func:`q_function`.

    Safeguarded Newton iteration: each Newton step that leaves the current
    bracket is replaced by a bisection step.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inverse requires 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    # Q(-38.5) == 1 and Q(38.5) ~ 1e-324 in double precision
    lo, hi = -38.5, 38.5
    x = 0.0
    for _ in range(max_iter):
        f = q_function(x) - p
        if f > 0.0:
            lo = x
        else:
            hi = x
        dens = math.exp(-0.5 * x * x) / SQRT2PI
        step = f / dens if dens > 0.0 else math.inf
        x_new = x + step  # Q' = -density, so Newton adds f / density
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * max(1.0, abs(x_new)):
            return x_new
        x = x_new
    return x


def r_func(h):
    """Closed-form Gaussian average of the soft-threshold energy.

    ``r(h) = sqrt(h / 2 pi) exp(-1 / (2h)) - (1 + h) Q(1 / sqrt(h))``,
    with ``r(0) = 0``.  Nonpositive for every ``h >= 0``.
    """
    if isinstance(h, (float, int)):
        if not h >= 0.0:
            raise ValueError("r_func requires h >= 0")
        if h < R_FUNC_ZERO_BELOW:
            return 0.0
        return math.sqrt(h / (2.0 * math.pi)) * math.exp(-0.5 / h) - (1.0 + h) * q_function(1.0 / math.sqrt(h))
    h = np.asarray(h, dtype=float)
    if np.any(h < 0.0) or np.any(np.isnan(h)):
        raise ValueError("r_func requires h >= 0")
    small = h < R_FUNC_ZERO_BELOW
    hs = np.where(small, 1.0, h)
    a = 1.0 / np.sqrt(hs)
    out = np.sqrt(hs / (2.0 * np.pi)) * np.exp(-0.5 / hs) - (1.0 + hs) * q_function(a)
    out = np.where(small, 0.0, out)
    return _scalar_or_array(out, h)


def phi(h, q_hat):
    """Minimum over real ``x`` of ``q_hat x^2 / 2 - h x + |x|``.

    Returns ``(value, minimizer)``; the minimizer is the soft-threshold
    point ``sign(h) max(|h| - 1, 0) / q_hat``.
    """
    h = np.asarray(h, dtype=float)
    q_hat = np.asarray(q_hat, dtype=float)
    if np.any(q_hat <= 0.0):
        raise ValueError("phi requires q_hat > 0 (objective unbounded below otherwise)")
    excess = np.maximum(np.abs(h) - 1.0, 0.0)
    value = -excess * excess / (2.0 * q_hat)
    minimizer = np.sign(h) * excess / q_hat
    if np.ndim(h) == 0 and np.ndim(q_hat) == 0:
        return float(value), float(minimizer)
    return value, minimizer


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for expectations under the standard normal."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size


def gauss_hermite_rule(n: int = DEFAULT_HERMITE_NODES) -> QuadratureRule:
    """Probabilists' Gauss-Hermite rule, weights normalized to sum to one."""
    if n < 1:
        raise ValueError("need at least one node")
    z, w = hermegauss(n)
    return QuadratureRule(z, w / SQRT2PI)


def split_gaussian_rule(
    breakpoints: Iterable[float] = (),
    nodes_per_piece: int = 64,
    cutoff: float = 14.0,
) -> QuadratureRule:
    """Composite Gauss-Legendre rule for ``Dz`` split at ``breakpoints``.

    Gauss-Hermite converges only algebraically for integrands with a kink
    (such as ``phi(z s; q)`` at ``|z| = 1/s``).  Splitting the line at the
    kinks and folding the Gaussian density into Legendre weights restores
    exponential convergence on each smooth piece.  Mass beyond ``cutoff``
    (about 1e-44 for the default) is dropped.
    """
    interior = sorted({float(b) for b in breakpoints if -cutoff < b < cutoff})
    edges = np.array([-cutoff, *interior, cutoff])
    x, w = _leggauss(nodes_per_piece)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        z = half * x + 0.5 * (a + b)
        nodes.append(z)
        weights.append(half * w * np.exp(-0.5 * z * z) / SQRT2PI)
    return QuadratureRule(np.concatenate(nodes), np.concatenate(weights))


def integrate_gaussian(f: Callable, rule: QuadratureRule | None = None) -> float:
    """``sum_i w_i f(z_i)``, an approximation of ``int f(z) Dz``.

    ``f`` is called once with the full node array.
    """
    if rule is None:
        rule = gauss_hermite_rule()
    if len(rule) == 0:
        raise ValueError("empty quadrature rule")
    values = np.asarray(f(rule.nodes), dtype=float)
    if values.shape != rule.nodes.shape:
        values = np.broadcast_to(values, rule.nodes.shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("integrand is not finite on the quadrature nodes")
    return float(np.dot(rule.weights, values))


def phi_average(scale: float, q_hat: float, nodes_per_piece: int = 64) -> float:
    """Quadrature value of ``int phi(z * scale; q_hat) Dz``.

    Independent numerical route to ``r_func(scale**2) / q_hat``.
    """
    if scale <= 0.0:
        return 0.0
    kink = 1.0 / scale
    rule = split_gaussian_rule((-kink, kink), nodes_per_piece)
    return integrate_gaussian(lambda z: phi(z * scale, q_hat)[0], rule)
