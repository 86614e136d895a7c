"""Herald detectors: true photon-number resolution and cascaded click detectors.

A cascade of ``n`` binary avalanche photodiodes behind an equal splitter
reports ``m`` clicks with the POVM ``sum_i w(i, m, n) |i><i|``, where
``w(i, m, n)`` is the probability that ``i`` photons, distributed uniformly
over ``n`` diodes, occupy exactly ``m`` of them. Detector inefficiency is not
modelled here; it is part of the herald-mode transmittance ``zeta1``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exceptions import DegenerateHeraldError, DomainError, TruncationError
from .fock import DiagonalState, ExperimentParams, diagonal_element, heralded_diagonals, success_probability

__all__ = [
    "DetectorModel",
    "PNR",
    "ClickWeightTable",
    "cap_weight",
    "click_weight_table",
    "herald_tail_ratio",
    "cap_cutoff",
    "cap_success_probability",
    "cap_heralded_diagonals",
    "herald_probability",
    "herald_state",
]

CAP_TAIL_TARGET = 1e-12
CAP_TAIL_LIMIT = 1e-10
_CAP_MAX_IMAX = 20_000


@dataclass(frozen=True)
class DetectorModel:
    """Either ``DetectorModel("pnr")`` or ``DetectorModel("cap", n)``."""

    variant: str = "pnr"
    n: int | None = None

    def __post_init__(self):
        if self.variant not in ("pnr", "cap"):
            raise DomainError(f"unknown detector variant {self.variant!r}")
        if self.variant == "cap":
            if self.n is None or int(self.n) != self.n or self.n < 1:
                raise DomainError(f"a cascade needs n >= 1 diodes, got {self.n}")
            object.__setattr__(self, "n", int(self.n))
        elif self.n is not None:
            raise DomainError("a PNR detector takes no diode count")

    @classmethod
    def cap(cls, n: int) -> DetectorModel:
        return cls("cap", n)

    @property
    def is_cap(self) -> bool:
        return self.variant == "cap"

    def check_outcome(self, m: int) -> None:
        if self.is_cap and not 0 <= m <= self.n:
            raise DomainError(f"a {self.n}-diode cascade cannot report {m} clicks")

    def label(self) -> str:
        return f"cap{self.n}" if self.is_cap else "pnr"

    def to_dict(self) -> dict:
        return {"detector": self.variant, "n": self.n}


PNR = DetectorModel("pnr")


def _occupancy_count(i: int, m: int, n: int) -> int:
    # number of maps from i photons onto n diodes hitting exactly m of them
    surj = sum((-1) ** j * math.comb(m, j) * (m - j) ** i for j in range(m + 1))
    return math.comb(n, m) * surj


def cap_weight(i: int, m: int, n: int) -> float:
    """Probability that ``i`` photons split over ``n`` diodes fire exactly ``m`` of them.

    The inclusion-exclusion sum is evaluated in exact integer arithmetic, so
    the alternating terms cannot cancel catastrophically.
    """
    if not 0 <= m <= n:
        raise DomainError(f"click count must satisfy 0 <= m <= n, got m={m}, n={n}")
    if i < 0:
        raise DomainError(f"photon number must be non-negative, got {i}")
    if i < m:
        return 0.0
    return float(Fraction(_occupancy_count(i, m, n), n**i))


@dataclass(frozen=True)
class ClickWeightTable:
    """``rows[i, m] = w(i, m, n)`` for ``0 <= i <= i_max`` and ``0 <= m <= n``."""

    n: int
    i_max: int
    rows: np.ndarray

    def column(self, m: int) -> np.ndarray:
        return self.rows[:, m]


def _build_table(n: int, i_max: int) -> ClickWeightTable:
    # w(i+1, m) = w(i, m) m/n + w(i, m-1) (n-m+1)/n, all terms non-negative
    rows = np.zeros((i_max + 1, n + 1))
    rows[0, 0] = 1.0
    occupied = np.arange(n + 1) / n
    fresh = (n - np.arange(n + 1) + 1) / n
    for i in range(i_max):
        rows[i + 1] = rows[i] * occupied
        rows[i + 1, 1:] += rows[i, :-1] * fresh[1:]
    rows.setflags(write=False)
    return ClickWeightTable(n=n, i_max=i_max, rows=rows)


_table_cache: dict[tuple[int, int], ClickWeightTable] = {}
_table_locks: dict[tuple[int, int], threading.Lock] = {}
_registry_lock = threading.Lock()


def click_weight_table(n: int, i_max: int) -> ClickWeightTable:
    """Cached weight table; each ``(n, i_max)`` key is built at most once per process."""
    key = (n, i_max)
    table = _table_cache.get(key)
    if table is not None:
        return table
    with _registry_lock:
        lock = _table_locks.setdefault(key, threading.Lock())
    with lock:
        table = _table_cache.get(key)
        if table is None:
            table = _build_table(n, i_max)
            _table_cache[key] = table
    return table


def herald_tail_ratio(p: ExperimentParams) -> float:
    """Ratio ``q`` with ``P_(i+1) = q P_(i)``; the PNR herald tail beyond ``I`` is ``q**(I+1)``."""
    l2 = p.lambda2
    return l2 * p.zeta1 / (1.0 - l2 * (1.0 - p.zeta1))


def cap_cutoff(p: ExperimentParams, n: int) -> int:
    """Smallest ``i_max >= max(50, 5n)`` whose neglected herald mass is below ``1e-12``."""
    floor = max(50, 5 * n)
    q = herald_tail_ratio(p)
    if q == 0.0:
        return floor
    needed = math.ceil(math.log(CAP_TAIL_TARGET) / math.log(q)) - 1
    i_max = max(floor, needed)
    if i_max > _CAP_MAX_IMAX:
        bound = q ** (_CAP_MAX_IMAX + 1)
        if bound > CAP_TAIL_LIMIT:
            raise TruncationError(
                f"click-detector series needs i_max={i_max}; tail bound {bound:.3e} at the cap"
            )
        i_max = _CAP_MAX_IMAX
    return i_max


def _pnr_herald_probs(p: ExperimentParams, i_max: int) -> np.ndarray:
    return np.array([success_probability(p.with_m(i)) for i in range(i_max + 1)])


def _check_cap(p: ExperimentParams, det: DetectorModel) -> None:
    if not det.is_cap:
        raise DomainError("expected a cascaded click detector")
    det.check_outcome(p.m)


def _cap_terms(p: ExperimentParams, det: DetectorModel) -> np.ndarray:
    # w(i, m, n) P_(i) for i <= i_max, with i_max extended until the neglected
    # mass is also small relative to the click probability itself
    i_max = cap_cutoff(p, det.n)
    q = herald_tail_ratio(p)
    while True:
        terms = click_weight_table(det.n, i_max).column(p.m) * _pnr_herald_probs(p, i_max)
        total = float(terms.sum())
        if q == 0.0 or total == 0.0 or q ** (i_max + 1) <= CAP_TAIL_TARGET * total:
            return terms
        needed = math.ceil(math.log(CAP_TAIL_TARGET * total) / math.log(q))
        if needed > _CAP_MAX_IMAX:
            if q ** (_CAP_MAX_IMAX + 1) > CAP_TAIL_LIMIT * total:
                raise TruncationError(
                    f"click-detector series cannot reach relative accuracy {CAP_TAIL_LIMIT:.0e}"
                )
            needed = _CAP_MAX_IMAX
        if needed <= i_max:
            return terms
        i_max = needed


def cap_success_probability(p: ExperimentParams, det: DetectorModel) -> float:
    """Probability of ``p.m`` clicks: herald probabilities weighted by click statistics."""
    _check_cap(p, det)
    return float(_cap_terms(p, det).sum())


def cap_heralded_diagonals(p: ExperimentParams, det: DetectorModel, cutoff: int) -> DiagonalState:
    """Signal diagonals after heralding on ``p.m`` clicks of the cascade.

    Mixture of the number-resolved heralded states over incident photon
    numbers ``i``, weighted by ``w(i, m, n) P_(i)``.
    """
    _check_cap(p, det)
    if cutoff < p.m + 1:
        raise DomainError(f"cutoff must be at least m + 1 = {p.m + 1}, got {cutoff}")
    weights = _cap_terms(p, det)
    total = float(weights.sum())
    if total == 0.0:
        raise DegenerateHeraldError(f"{p.m} clicks have zero probability for these parameters")
    # weights decay geometrically; drop terms that cannot move the mixture at double precision
    keep = np.nonzero(weights > total * 1e-17)[0]
    mix = np.zeros(cutoff)
    for i in keep:
        pi = p.with_m(int(i))
        mix += weights[i] * np.array([diagonal_element(pi, k) for k in range(cutoff)])
    return DiagonalState.from_probs(mix / total)


def herald_probability(p: ExperimentParams, det: DetectorModel) -> float:
    if det.is_cap:
        return cap_success_probability(p, det)
    return success_probability(p)


def herald_state(p: ExperimentParams, det: DetectorModel, cutoff: int) -> DiagonalState:
    if det.is_cap:
        return cap_heralded_diagonals(p, det, cutoff)
    return heralded_diagonals(p, cutoff)
