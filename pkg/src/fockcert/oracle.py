"""Brute-force reference model built from explicit Kraus operators.

This module deliberately shares no code with :mod:`fockcert.fock`. It builds
the truncated photon-number statistics of two-mode squeezed vacuum, pushes
each mode through the loss channel by applying the Kraus operators literally,
and conditions on the herald count.

Only the diagonal sector is needed: the reduced two-mode number statistics of
the squeezed vacuum are carried by the ``|i,i><i,i|`` terms, loss maps number
states to mixtures of number states, and counting projects onto number states,
so coherences ``|i,i><j,j|`` with ``i != j`` never reach a measured diagonal.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DegenerateHeraldError, DomainError, TruncationError
from .fock import DiagonalState, ExperimentParams

__all__ = [
    "DEFAULT_ORACLE_CUTOFF",
    "TAIL_DEFICIT_LIMIT",
    "JointNumberDistribution",
    "kraus_operator",
    "loss_kernel",
    "loss_matrix",
    "oracle_joint",
    "oracle_heralded",
    "oracle_povm_heralded",
]

DEFAULT_ORACLE_CUTOFF = 40
TAIL_DEFICIT_LIMIT = 1e-10


def kraus_operator(k: int, zeta: float, dim: int) -> np.ndarray:
    """Matrix of ``M_k = sqrt((1-zeta)^k / k!) sqrt(zeta)^n a^k`` on ``dim`` number states."""
    op = np.zeros((dim, dim))
    pref = math.sqrt((1.0 - zeta) ** k / math.factorial(k))
    for i in range(k, dim):
        # a^k |i> = sqrt(i! / (i-k)!) |i-k>
        amp = math.sqrt(math.factorial(i) / math.factorial(i - k))
        op[i - k, i] = pref * amp * math.sqrt(zeta) ** (i - k)
    return op


def loss_kernel(i: int, zeta: float) -> np.ndarray:
    """Output photon-number distribution of ``sum_k M_k |i><i| M_k^dagger``.

    Returns a vector of length ``i + 1``; entry ``j`` is the probability of
    ``j`` photons surviving.
    """
    if not 0.0 <= zeta <= 1.0:
        raise DomainError(f"transmittance must lie in [0, 1], got {zeta}")
    if i < 0:
        raise DomainError(f"photon number must be non-negative, got {i}")
    dim = i + 1
    rho = np.zeros((dim, dim))
    rho[i, i] = 1.0
    out = np.zeros((dim, dim))
    for k in range(dim):
        mk = kraus_operator(k, zeta, dim)
        out += mk @ rho @ mk.T
    return np.diag(out).copy()


@lru_cache(maxsize=64)
def loss_matrix(zeta: float, dim: int) -> np.ndarray:
    """Row-stochastic matrix ``T[i, j]``: probability that ``i`` photons become ``j``."""
    mat = np.zeros((dim, dim))
    for i in range(dim):
        mat[i, : i + 1] = loss_kernel(i, zeta)
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True)
class JointNumberDistribution:
    """Joint counts ``p[a, b]`` of herald mode ``a`` and signal mode ``b`` after loss."""

    p: np.ndarray
    tail_deficit: float

    @property
    def truncation(self) -> int:
        return self.p.shape[0]


def oracle_joint(p: ExperimentParams, cutoff: int = DEFAULT_ORACLE_CUTOFF) -> JointNumberDistribution:
    """Truncated joint number statistics of the lossy two-mode squeezed vacuum."""
    if cutoff < 1:
        raise DomainError(f"oracle cutoff must be positive, got {cutoff}")
    lam2 = math.tanh(p.squeeze.r) ** 2
    source = np.array([(1.0 - lam2) * lam2**i for i in range(cutoff)])
    deficit = lam2**cutoff
    if deficit > TAIL_DEFICIT_LIMIT:
        raise TruncationError(
            f"oracle cutoff {cutoff} leaves tail mass {deficit:.3e} above {TAIL_DEFICIT_LIMIT:.0e}"
        )
    herald = loss_matrix(p.zeta1, cutoff)
    signal = loss_matrix(p.zeta2, cutoff)
    joint = herald.T @ np.diag(source) @ signal
    return JointNumberDistribution(p=joint, tail_deficit=deficit)


def oracle_povm_heralded(
    p: ExperimentParams,
    povm: Callable[[int], float],
    cutoff: int = DEFAULT_ORACLE_CUTOFF,
) -> tuple[float, DiagonalState]:
    """Herald on a number-diagonal POVM element given by ``povm(a)`` for herald count ``a``.

    Returns the herald probability and the normalized signal diagonals.
    """
    joint = oracle_joint(p, cutoff)
    weights = np.array([povm(a) for a in range(cutoff)])
    unnormalized = weights @ joint.p
    prob = float(unnormalized.sum())
    if prob == 0.0:
        raise DegenerateHeraldError("herald outcome has zero probability in the oracle model")
    return prob, DiagonalState.from_probs(unnormalized / prob)


def oracle_heralded(p: ExperimentParams, cutoff: int = DEFAULT_ORACLE_CUTOFF) -> tuple[float, DiagonalState]:
    """Herald on exactly ``p.m`` counts with an ideal number-resolving detector."""
    if cutoff <= p.m:
        raise DomainError(f"oracle cutoff must exceed m = {p.m}, got {cutoff}")
    return oracle_povm_heralded(p, lambda a: 1.0 if a == p.m else 0.0, cutoff)
