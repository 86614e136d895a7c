"""Finite-statistics emulation of a heralded-state measurement campaign.

Each simulated experimental run draws a photon-count histogram from the model
diagonals, with the number of samples set by the herald success probability
and the shot budget. The witness pair of every run is collected and the
ensemble is summarized by means and sample standard deviations.

Every run draws from its own random stream, derived from the campaign seed
and a key (tile coordinates, squeezing index, run index), so results do not
depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .detectors import DetectorModel, herald_probability, herald_state
from .exceptions import DomainError, InsufficientSamplesError
from .fock import DiagonalState, ExperimentParams

__all__ = [
    "SIGNIFICANCE_FLOOR",
    "CampaignConfig",
    "EnsembleStats",
    "FULL_CAMPAIGN",
    "FAST_CAMPAIGN",
    "run_stream",
    "per_run_samples",
    "draw_run",
    "witness_pair",
    "simulate_runs",
    "summarize_runs",
    "simulate_ensemble",
    "truncate_state",
]

SIGNIFICANCE_FLOOR = 1000


@dataclass(frozen=True)
class CampaignConfig:
    """Shot budget, ensemble size, histogram cutoff and seed of a simulated campaign.

    ``sample_cutoff`` bins cover ``k < sample_cutoff``; one extra overflow bin
    collects everything above.
    """

    repetitions: int = 10**8
    runs: int = 1000
    sample_cutoff: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise DomainError(f"repetitions must be positive, got {self.repetitions}")
        if self.runs < 2:
            raise DomainError(f"an ensemble needs at least 2 runs, got {self.runs}")
        if self.sample_cutoff < 2:
            raise DomainError(f"sample_cutoff must be at least 2, got {self.sample_cutoff}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def check_target(self, m: int) -> None:
        if self.sample_cutoff < m + 2:
            raise DomainError(f"sample_cutoff must be at least m + 2 = {m + 2}, got {self.sample_cutoff}")

    def to_dict(self) -> dict:
        return asdict(self)


FULL_CAMPAIGN = CampaignConfig(repetitions=10**8, runs=1000)
FAST_CAMPAIGN = CampaignConfig(repetitions=10**6, runs=100)


@dataclass(frozen=True)
class EnsembleStats:
    m: int
    mean_x: float
    mean_y: float
    sd_x: float
    sd_y: float
    n_samples: int
    runs: int

    def to_dict(self) -> dict:
        return asdict(self)


def run_stream(seed: int, key: Sequence[int]) -> np.random.Generator:
    """Independent generator for the stream identified by ``(seed, *key)``."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def per_run_samples(p: ExperimentParams, det: DetectorModel, cfg: CampaignConfig) -> int:
    """Samples available to one run: ``floor(repetitions * P)``.

    Raises :class:`InsufficientSamplesError` below the floor of 1000 samples.
    """
    return _samples_for(herald_probability(p, det), cfg.repetitions)


def _samples_for(probability: float, repetitions: int) -> int:
    # guard against P * R landing a hair below an integer it equals exactly
    product = probability * repetitions
    n = math.floor(product)
    if math.isclose(product, n + 1, rel_tol=4 * np.finfo(float).eps):
        n += 1
    if n < SIGNIFICANCE_FLOOR:
        raise InsufficientSamplesError(n, SIGNIFICANCE_FLOOR)
    return n


def _bin_probabilities(state: DiagonalState) -> np.ndarray:
    return np.append(state.probs, state.tail_mass)


def _draw(probs: np.ndarray, suffix: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    counts = np.zeros(probs.size, dtype=np.int64)
    remaining = n_samples
    last = probs.size - 1
    for k in range(last):
        if remaining == 0:
            break
        rest = suffix[k]
        if rest <= 0.0:
            break
        p_cond = min(1.0, probs[k] / rest)
        c = int(rng.binomial(remaining, p_cond))
        counts[k] = c
        remaining -= c
    counts[last] += remaining
    return counts


def _suffix_sums(probs: np.ndarray) -> np.ndarray:
    return np.cumsum(probs[::-1])[::-1]


def draw_run(state: DiagonalState, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial histogram of ``n_samples`` counts over ``state.cutoff`` bins plus overflow.

    Uses the sequential conditional-binomial construction: bin ``k`` receives
    ``Binomial(remaining, p_k / sum_{j>=k} p_j)`` counts.
    """
    if n_samples < 1:
        raise DomainError(f"n_samples must be positive, got {n_samples}")
    probs = _bin_probabilities(state)
    return _draw(probs, _suffix_sums(probs), n_samples, rng)


def witness_pair(hist, m: int) -> tuple[float, float]:
    """Empirical ``(x_m, y_m)``: fraction of counts above ``m`` (overflow included) and at ``m``."""
    hist = np.asarray(hist)
    if m >= hist.size - 1:
        raise DomainError(f"m={m} must lie below the histogram cutoff {hist.size - 1}")
    total = int(hist.sum())
    if total <= 0:
        raise DomainError("empty histogram")
    above = total - int(hist[: m + 1].sum())
    return above / total, int(hist[m]) / total


def simulate_runs(
    state: DiagonalState,
    n_samples: int,
    runs: int,
    seed: int,
    key: Sequence[int] = (),
) -> np.ndarray:
    """Histograms of ``runs`` independent runs, shape ``(runs, cutoff + 1)``."""
    probs = _bin_probabilities(state)
    suffix = _suffix_sums(probs)
    out = np.empty((runs, probs.size), dtype=np.int64)
    for run in range(runs):
        out[run] = _draw(probs, suffix, n_samples, run_stream(seed, (*key, run)))
    return out


def summarize_runs(histograms: np.ndarray, m: int) -> EnsembleStats:
    pairs = np.array([witness_pair(h, m) for h in histograms])
    runs = pairs.shape[0]
    means = pairs.mean(axis=0)
    sds = pairs.std(axis=0, ddof=1)
    return EnsembleStats(
        m=m,
        mean_x=float(means[0]),
        mean_y=float(means[1]),
        sd_x=float(sds[0]),
        sd_y=float(sds[1]),
        n_samples=int(histograms[0].sum()),
        runs=runs,
    )


def truncate_state(state: DiagonalState, cutoff: int) -> DiagonalState:
    """Fold everything at ``k >= cutoff`` into the overflow mass."""
    if cutoff >= state.cutoff:
        return state
    head = state.probs[:cutoff]
    return DiagonalState(probs=head, tail_mass=state.tail_mass + float(state.probs[cutoff:].sum()))


def simulate_ensemble(
    p: ExperimentParams,
    det: DetectorModel,
    cfg: CampaignConfig,
    key: Sequence[int] = (),
    state: DiagonalState | None = None,
) -> EnsembleStats:
    """Ensemble witness statistics for one parameter point.

    ``key`` identifies the point within a larger sweep; ``state`` may be
    passed to skip recomputing the model diagonals.
    """
    cfg.check_target(p.m)
    n_samples = per_run_samples(p, det, cfg)
    if state is None:
        state = herald_state(p, det, cfg.sample_cutoff)
    state = truncate_state(state, cfg.sample_cutoff)
    hists = simulate_runs(state, n_samples, cfg.runs, cfg.seed, key)
    return summarize_runs(hists, p.m)
