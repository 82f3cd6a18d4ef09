"""Large-M limits of Haar sphere integrals and a finite-M quadrature oracle.

For independent ``u1, u2`` uniform on spheres of squared radius ``M r1``
and ``M r2`` in R^M,

    F(r1, r2, c) = lim M^-1 log E exp(c u1^T u2)
                 = sqrt(1 + 4 c^2 r1 r2)/2 - log((1 + sqrt(1 + 4 c^2 r1 r2))/2)/2 - 1/2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special


class QuadratureError(RuntimeError):
    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (error estimate {error_estimate:.3g})")
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class OverlapPair:
    """Replica-symmetric overlaps of one block: diagonal ``s11``, off-diagonal ``s12``."""

    s11: float
    s12: float

    def __post_init__(self):
        if not (self.s11 >= 0 and self.s12 >= 0 and self.s11 >= self.s12):
            raise ValueError(f"inadmissible overlaps: need s11 >= s12 >= 0, got ({self.s11}, {self.s12})")


def _check_radii(r1: float, r2: float) -> None:
    if not (r1 > 0 and r2 > 0):
        raise ValueError(f"radii must be positive, got ({r1}, {r2})")


def f_haar(r1: float, r2: float, c: float) -> float:
    _check_radii(r1, r2)
    s = math.sqrt(1.0 + 4.0 * c * c * r1 * r2)
    # log((1+s)/2) = log1p((s-1)/2) keeps small-c values accurate
    return (s - 1.0) / 2.0 - 0.5 * math.log1p((s - 1.0) / 2.0)


def f_haar_asymptotic(r1: float, r2: float, c: float) -> float:
    """Leading behaviour of :func:`f_haar` for ``c^2 r1 r2 >> 1``."""
    g = c * c * r1 * r2
    if not g > 0:
        raise ValueError("asymptotic form needs c^2 r1 r2 > 0")
    return math.sqrt(g) - math.log(g) / 4.0


def i_m_quadrature(M: int, r1: float, r2: float, c: float, rtol: float = 1e-10) -> float:
    """``M^-1 log E exp(c u1^T u2)`` at finite ``M`` by 1-D quadrature.

    With ``t`` the cosine of the angle between ``u1`` and ``u2`` (density
    proportional to ``(1-t^2)^((M-3)/2)``), ``u1^T u2 = M sqrt(r1 r2) t``.
    The integrand is divided by its maximum before integrating; the
    normalizer is the exact beta integral.
    """
    if M < 3:
        raise ValueError("sphere dimension must be at least 3")
    _check_radii(r1, r2)
    if c == 0:
        return 0.0
    a = c * M * math.sqrt(r1 * r2)
    k = (M - 3) / 2.0
    # maximiser of a t + k log(1 - t^2)
    t_star = math.copysign(1.0, a) if k == 0 else a / (k + math.hypot(k, a))
    log_peak = a * t_star + (k * math.log1p(-t_star * t_star) if k > 0 else 0.0)

    def integrand(t):
        log_w = k * math.log1p(-t * t) if k > 0 else 0.0
        return math.exp(a * t + log_w - log_peak)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(integrand, -1.0, 1.0, points=[t_star], epsabs=0.0,
                                      epsrel=rtol, limit=500)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge: {exc}", float("nan")) from exc
    if not (val > 0 and err <= 100 * rtol * val):
        raise QuadratureError("quadrature did not reach the requested accuracy", err / val if val else np.inf)
    log_norm = special.betaln(0.5, k + 1.0)
    return (log_peak + math.log(val) - log_norm) / M


def lemma2_value(block1: OverlapPair, block2: OverlapPair, c: float, u: int) -> float:
    """Replica-symmetric value ``F(a1, a2; c) + (u-1) F(b1, b2; c)``.

    ``a_i = s11 - s12 + u s12`` and ``b_i = s11 - s12`` per block.  A zero
    radius makes the corresponding F vanish.
    """
    if int(u) != u or u < 1:
        raise ValueError("replica count must be a positive integer")
    for blk in (block1, block2):
        if not isinstance(blk, OverlapPair):
            raise TypeError("blocks must be OverlapPair instances")

    def F(x1, x2):
        return 0.0 if x1 == 0 or x2 == 0 else f_haar(x1, x2, c)

    b1, b2 = block1.s11 - block1.s12, block2.s11 - block2.s12
    value = F(b1 + u * block1.s12, b2 + u * block2.s12)
    if u > 1:
        value += (u - 1) * F(b1, b2)
    return value
