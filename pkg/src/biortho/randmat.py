"""Random dictionaries, planted sparse signals and problem instances.

Every sampler takes an explicit ``numpy.random.Generator``.  Streams for
Monte Carlo trials come from :func:`make_stream`, a counter-based Philox
generator keyed by a tuple of integers, so trial ``t`` of point ``p`` has
its own stream no matter in which order trials run.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .replica import SparsityProfile

BI_ORTHOGONAL = "bi-orthogonal"
IID_GAUSSIAN = "iid-gaussian"
KINDS = (BI_ORTHOGONAL, IID_GAUSSIAN)


def make_stream(*key: int) -> np.random.Generator:
    """Independent Philox stream for an integer key such as ``(seed, N, i, t)``."""
    if not key or any(int(k) < 0 for k in key):
        raise ValueError("stream keys must be a non-empty tuple of non-negative ints")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def sample_haar_orthogonal(M: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``M x M`` orthogonal matrix.

    QR of a Gaussian matrix, with each column of Q multiplied by the sign of
    the matching diagonal entry of R; without that correction the result is
    not Haar distributed.
    """
    if M < 1:
        raise ValueError("matrix order must be at least 1")
    q, r = np.linalg.qr(rng.standard_normal((M, M)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def sample_gaussian_dictionary(M: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """IID ``N(0, 1/M)`` entries, so columns have unit norm on average."""
    if M < 1 or N < 1:
        raise ValueError("dictionary dimensions must be positive")
    return rng.standard_normal((M, N)) / np.sqrt(M)


@dataclass(frozen=True)
class SignalVector:
    block1: np.ndarray
    block2: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.block1, self.block2])

    @property
    def support1(self) -> np.ndarray:
        return np.flatnonzero(self.block1)

    @property
    def support2(self) -> np.ndarray:
        return np.flatnonzero(self.block2)


def sample_signal(M: int, rho1: float, rho2: float, rng: np.random.Generator) -> SignalVector:
    """Bernoulli-Gaussian blocks: each entry is nonzero with probability ``rho_i``.

    The support size is Binomial(M, rho_i), not fixed.
    """
    if M < 1:
        raise ValueError("block length must be at least 1")
    for rho in (rho1, rho2):
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"block density must lie in [0, 1], got {rho!r}")
    blocks = []
    for rho in (rho1, rho2):
        mask = rng.random(M) < rho
        values = rng.standard_normal(M)
        blocks.append(np.where(mask, values, 0.0))
    return SignalVector(*blocks)


@dataclass(frozen=True)
class ProblemInstance:
    kind: str
    D: np.ndarray
    signal: SignalVector
    y: np.ndarray
    seed: tuple[int, ...]

    @property
    def M(self) -> int:
        return self.D.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.signal.x


def _as_key(seed: int | Sequence[int]) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def build_instance(
    M: int,
    profile: SparsityProfile,
    kind: str = BI_ORTHOGONAL,
    seed: int | Sequence[int] = 0,
) -> ProblemInstance:
    """Dictionary, planted signal and observation ``y = D x``.

    Draw order is fixed (dictionary first, then signal) so an instance is a
    pure function of ``(M, profile, kind, seed)``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown dictionary kind {kind!r}; expected one of {KINDS}")
    key = _as_key(seed)
    rng = make_stream(*key)
    if kind == BI_ORTHOGONAL:
        D = np.hstack([sample_haar_orthogonal(M, rng), sample_haar_orthogonal(M, rng)])
    else:
        D = sample_gaussian_dictionary(M, 2 * M, rng)
    signal = sample_signal(M, profile.rho1, profile.rho2, rng)
    return ProblemInstance(kind, D, signal, D @ signal.x, key)


def instance_from_arrays(D: np.ndarray, x: np.ndarray, kind: str = BI_ORTHOGONAL) -> ProblemInstance:
    """Wrap an explicit ``(D, x)`` pair; ``x`` is split into two equal blocks."""
    D = np.asarray(D, dtype=float)
    x = np.asarray(x, dtype=float)
    M = D.shape[0]
    if D.shape != (M, 2 * M) or x.shape != (2 * M,):
        raise ValueError("expected D of shape (M, 2M) and x of length 2M")
    signal = SignalVector(x[:M].copy(), x[M:].copy())
    return ProblemInstance(kind, D, signal, D @ x, ())
