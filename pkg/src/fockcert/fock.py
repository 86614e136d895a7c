r"""Closed-form model of a Fock state heralded from two-mode squeezed vacuum.

Both modes of the squeezed source pass through pure-loss channels before
ideal photon counting. Heralding on ``m`` counts in the first mode leaves the
second mode in a state that is diagonal in the Fock basis, so every quantity
here is a probability vector rather than a density matrix.

With :math:`x = \lambda^2 (1-\zeta_1)(1-\zeta_2)` the diagonal elements are
built from the series

.. math::

    F(k, m, x) = \sum_{j \ge 0} \binom{\tau + j}{m} \binom{\tau + j}{k} x^j,
    \qquad \tau = \max(k, m),

which is the hypergeometric-type series ``H(k, m, x) = x**tau * F(k, m, x)``
with the leading power factored out. Evaluating ``F`` instead of ``H`` keeps
the lossless and zero-squeezing limits free of 0/0 expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateHeraldError, DomainError, TruncationError

__all__ = [
    "DB_PER_NEPER",
    "SqueezeParam",
    "ExperimentParams",
    "DiagonalState",
    "db_to_rate",
    "rate_to_db",
    "series_F",
    "series_H",
    "success_probability",
    "heralded_diagonals",
    "diagonal_element",
]

# S_dB = 10 log10(exp(2 r))
DB_PER_NEPER = 20.0 / math.log(10.0)

_EXACT_BINOM_LIMIT = 50
_TERM_RTOL = 1e-15
_TAIL_RTOL = 1e-14
_MAX_TERMS = 100_000
_NORM_ATOL = 1e-9


@dataclass(frozen=True)
class SqueezeParam:
    """Two-mode squeezing, stored as rate ``r``, ``lam = tanh(r)`` and decibels."""

    r: float
    lam: float
    db: float

    def __post_init__(self):
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise DomainError(f"squeezing rate must be finite and non-negative, got {self.r}")
        if not 0.0 <= self.lam < 1.0:
            raise DomainError(f"lambda must satisfy 0 <= lambda < 1, got {self.lam}")

    @classmethod
    def from_rate(cls, r: float) -> SqueezeParam:
        return cls(r=float(r), lam=math.tanh(r), db=rate_to_db(r))

    @classmethod
    def from_db(cls, db: float) -> SqueezeParam:
        return db_to_rate(db)

    @classmethod
    def from_lambda2(cls, lambda2: float) -> SqueezeParam:
        if not 0.0 <= lambda2 < 1.0:
            raise DomainError(f"lambda^2 must satisfy 0 <= lambda^2 < 1, got {lambda2}")
        lam = math.sqrt(lambda2)
        r = math.atanh(lam)
        return cls(r=r, lam=lam, db=rate_to_db(r))

    @property
    def lambda2(self) -> float:
        return self.lam * self.lam


def db_to_rate(db: float) -> SqueezeParam:
    """Convert squeezing in decibels to a :class:`SqueezeParam`.

    Uses the quadrature-variance convention ``S_dB = 10 log10(exp(2 r))``,
    so 10 dB corresponds to ``r = ln(10) / 2``.
    """
    if not (db >= 0 and math.isfinite(db)):
        raise DomainError(f"squeezing in dB must be finite and non-negative, got {db}")
    r = db / DB_PER_NEPER
    return SqueezeParam(r=r, lam=math.tanh(r), db=float(db))


def rate_to_db(r: float) -> float:
    if r < 0:
        raise DomainError(f"squeezing rate must be non-negative, got {r}")
    return r * DB_PER_NEPER


@dataclass(frozen=True)
class ExperimentParams:
    """Source squeezing, the two transmittances and the herald outcome.

    ``zeta1`` is the transmittance of the heralding mode and ``zeta2`` that of
    the mode carrying the prepared state. Losses are ``1 - zeta``.
    """

    squeeze: SqueezeParam
    zeta1: float
    zeta2: float
    m: int

    def __post_init__(self):
        for name in ("zeta1", "zeta2"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 0:
            raise DomainError(f"herald outcome m must be a non-negative integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def from_losses(cls, squeeze: SqueezeParam, loss1: float, loss2: float, m: int) -> ExperimentParams:
        for name, loss in (("loss1", loss1), ("loss2", loss2)):
            if not 0.0 <= loss <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {loss}")
        return cls(squeeze=squeeze, zeta1=1.0 - loss1, zeta2=1.0 - loss2, m=m)

    @property
    def lambda2(self) -> float:
        return self.squeeze.lambda2

    @property
    def x(self) -> float:
        """Argument of the diagonal series, ``lambda^2 (1 - zeta1)(1 - zeta2)``."""
        return self.lambda2 * (1.0 - self.zeta1) * (1.0 - self.zeta2)

    def with_squeeze(self, squeeze: SqueezeParam) -> ExperimentParams:
        return ExperimentParams(squeeze=squeeze, zeta1=self.zeta1, zeta2=self.zeta2, m=self.m)

    def with_m(self, m: int) -> ExperimentParams:
        return ExperimentParams(squeeze=self.squeeze, zeta1=self.zeta1, zeta2=self.zeta2, m=m)


@dataclass(frozen=True)
class DiagonalState:
    """Fock-basis diagonal ``probs[k] = <k|rho|k>`` for ``k < cutoff`` plus the mass above."""

    probs: np.ndarray
    tail_mass: float

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise DomainError("probs must be a non-empty vector")
        if np.any(probs < 0) or self.tail_mass < 0:
            raise DomainError("probabilities must be non-negative")
        total = probs.sum() + self.tail_mass
        if abs(total - 1.0) > _NORM_ATOL:
            raise DomainError(f"state is not normalized: total mass {total!r}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_mass", float(self.tail_mass))

    @classmethod
    def from_probs(cls, probs) -> DiagonalState:
        """Wrap a truncated probability vector, assigning the missing mass to the tail.

        Rounding can push the truncated sum a hair above one; such excess
        (below the normalization tolerance) is absorbed into the vector.
        """
        probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
        total = probs.sum()
        if total > 1.0:
            if total - 1.0 > _NORM_ATOL:
                raise DomainError(f"truncated probabilities exceed one: {total!r}")
            return cls(probs=probs / total, tail_mass=0.0)
        return cls(probs=probs, tail_mass=1.0 - total)

    @property
    def cutoff(self) -> int:
        return self.probs.size

    def fidelity(self, m: int) -> float:
        """Overlap ``<m|rho|m>`` with the Fock state ``|m>``."""
        if m >= self.cutoff:
            raise DomainError(f"Fock index {m} is beyond the cutoff {self.cutoff}")
        return float(self.probs[m])

    def witness(self, m: int) -> tuple[float, float]:
        """Exact witness pair: mass above ``m`` photons and mass at ``m``."""
        below = float(self.probs[: m + 1].sum())
        return 1.0 - below, self.fidelity(m)


def _binom_product(l: int, m: int, k: int) -> float:
    # fixed argument order keeps the result bitwise symmetric in (m, k)
    m, k = min(m, k), max(m, k)
    if l < _EXACT_BINOM_LIMIT:
        return float(math.comb(l, m) * math.comb(l, k))
    lg = math.lgamma
    log_value = 2.0 * lg(l + 1) - lg(m + 1) - lg(l - m + 1) - lg(k + 1) - lg(l - k + 1)
    return math.exp(log_value)


def series_F(k: int, m: int, x: float) -> float:
    """Regrouped series ``F(k, m, x) = H(k, m, x) / x**max(k, m)``.

    Summation stops once the current term is below ``1e-15`` of the running
    sum and the geometric bound on the remaining tail, built from the
    (monotonically decreasing) ratio of consecutive terms, is below ``1e-14``
    of the running sum.
    """
    if k < 0 or m < 0:
        raise DomainError(f"indices must be non-negative, got k={k}, m={m}")
    if not 0.0 <= x < 1.0:
        raise DomainError(f"series argument must satisfy 0 <= x < 1, got {x}")
    k, m = min(k, m), max(k, m)
    tau = m
    total = 0.0
    log_x = math.log(x) if x > 0 else None
    for j in range(_MAX_TERMS):
        l = tau + j
        if j == 0:
            term = _binom_product(l, m, k)
        elif log_x is None:
            break
        elif l < _EXACT_BINOM_LIMIT:
            term = _binom_product(l, m, k) * x**j
        else:
            lg = math.lgamma
            log_term = (
                2.0 * lg(l + 1) - lg(m + 1) - lg(l - m + 1) - lg(k + 1) - lg(l - k + 1) + j * log_x
            )
            term = math.exp(log_term)
        total += term
        if not math.isfinite(total):
            raise OverflowError(f"series F({k}, {m}, {x}) overflows double precision")
        if term == 0.0:
            break
        ratio = x * (l + 1) ** 2 / ((l + 1 - m) * (l + 1 - k))
        if ratio < 1.0 and term < _TERM_RTOL * total and term * ratio / (1.0 - ratio) < _TAIL_RTOL * total:
            break
    else:
        raise TruncationError(f"series F({k}, {m}, {x}) did not converge in {_MAX_TERMS} terms")
    return total


def series_H(k: int, m: int, x: float) -> float:
    r"""Evaluate :math:`H(k, m, x) = \sum_{l \ge \max(k,m)} \binom{l}{m}\binom{l}{k} x^l`.

    Symmetric in ``k`` and ``m``; valid for ``0 <= x < 1``.

    >>> series_H(0, 0, 0.5)
    2.0
    """
    f = series_F(k, m, x)
    return x ** max(k, m) * f


def success_probability(p: ExperimentParams) -> float:
    """Probability that an ideal photon counter on the lossy herald mode registers ``p.m``."""
    l2 = p.lambda2
    denom = 1.0 - l2 * (1.0 - p.zeta1)
    return (1.0 - l2) * (l2 * p.zeta1) ** p.m / denom ** (p.m + 1)


def heralded_diagonals(p: ExperimentParams, cutoff: int) -> DiagonalState:
    """Normalized Fock diagonals of the signal mode after heralding on ``p.m`` counts.

    Evaluated in the regrouped form where the would-be divergent prefactors
    appear only with non-negative exponents, so ``zeta1 = 1``, ``zeta2 = 1``
    and ``lambda = 0`` are exact.
    """
    m = p.m
    if cutoff < m + 1:
        raise DomainError(f"cutoff must be at least m + 1 = {m + 1}, got {cutoff}")
    if success_probability(p) == 0.0:
        raise DegenerateHeraldError(
            f"heralding on m={m} has zero probability (lambda^2={p.lambda2}, zeta1={p.zeta1})"
        )
    probs = np.array([diagonal_element(p, k) for k in range(cutoff)])
    return DiagonalState.from_probs(probs)


def diagonal_element(p: ExperimentParams, k: int) -> float:
    """Single normalized diagonal ``<k|rho|k>`` of the state heralded on ``p.m`` counts.

    No check for a degenerate herald is made here; see :func:`heralded_diagonals`.
    """
    m = p.m
    l2, z1, z2 = p.lambda2, p.zeta1, p.zeta2
    tau = max(k, m)
    return (
        (1.0 - l2 * (1.0 - z1)) ** (m + 1)
        * z2**k
        * (l2 * (1.0 - z1)) ** (tau - m)
        * (1.0 - z2) ** (tau - k)
        * series_F(k, m, p.x)
    )
