"""Loss-plane sweeps: best certifiable success probability per (heralding, characterization) loss tile.

For every tile the squeezing is scanned over a fixed dB grid. Candidates
with success probability below ``1e-5`` are excluded; the rest are simulated
and certified, and the tile keeps the certified candidate with the largest
success probability. Because that is a maximum over a finite set, candidates
are visited in order of decreasing probability and the scan stops at the
first certified one; ``exhaustive=True`` visits all of them instead and gives
the same tile.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .certify import ThresholdCurve, certify
from .detectors import DetectorModel, herald_probability, herald_state
from .exceptions import DomainError, InsufficientSamplesError
from .fock import ExperimentParams, db_to_rate
from .montecarlo import CampaignConfig, simulate_ensemble

__all__ = [
    "MIN_SUCCESS_PROBABILITY",
    "MAX_DB",
    "CERTIFIED",
    "UNCERTIFIABLE",
    "INSIGNIFICANT",
    "default_db_grid",
    "SweepGrid",
    "Tile",
    "TileMap",
    "FeasibilityContour",
    "optimize_over_squeezing",
    "run_sweep",
    "extract_thresholds",
    "monotonicity_exceptions",
    "tiles_to_csv",
    "tiles_from_csv",
    "contour_to_csv",
    "contour_from_csv",
]

MIN_SUCCESS_PROBABILITY = 1e-5
MAX_DB = 10.0

CERTIFIED = "certified"
UNCERTIFIABLE = "uncertifiable"
INSIGNIFICANT = "insignificant"

TILE_COLUMNS = ("loss1", "loss2", "status", "best_r_db", "best_probability", "fidelity")
CONTOUR_COLUMNS = ("loss1", "max_loss2")


def default_db_grid(step: float = 0.25, max_db: float = MAX_DB) -> tuple[float, ...]:
    """Uniform squeezing grid ``0, step, ..., max_db`` in decibels."""
    if step <= 0:
        raise DomainError(f"grid step must be positive, got {step}")
    count = int(round(max_db / step))
    if not math.isclose(count * step, max_db, rel_tol=1e-9, abs_tol=1e-12):
        raise DomainError(f"step {step} does not divide {max_db} dB")
    return tuple(round(i * step, 12) for i in range(count + 1))


def _check_losses(name: str, values: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if not values:
        raise DomainError(f"{name} grid is empty")
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name} value {v} outside [0, 1]")
    return values


@dataclass(frozen=True)
class SweepGrid:
    """Loss values for both modes (``loss = 1 - zeta``), squeezing candidates in dB, target and campaign."""

    loss1_values: tuple[float, ...]
    loss2_values: tuple[float, ...]
    db_grid: tuple[float, ...]
    m: int
    detector: DetectorModel
    campaign: CampaignConfig

    def __post_init__(self):
        object.__setattr__(self, "loss1_values", _check_losses("loss1", self.loss1_values))
        object.__setattr__(self, "loss2_values", _check_losses("loss2", self.loss2_values))
        dbs = tuple(float(d) for d in self.db_grid)
        if not dbs:
            raise DomainError("squeezing grid is empty")
        if min(dbs) < 0 or max(dbs) > MAX_DB + 1e-9:
            raise DomainError(f"squeezing grid must lie within [0, {MAX_DB}] dB")
        object.__setattr__(self, "db_grid", dbs)
        self.detector.check_outcome(self.m)
        self.campaign.check_target(self.m)

    @property
    def zeta1_values(self) -> tuple[float, ...]:
        return tuple(1.0 - v for v in self.loss1_values)

    @property
    def zeta2_values(self) -> tuple[float, ...]:
        return tuple(1.0 - v for v in self.loss2_values)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.loss1_values), len(self.loss2_values)


@dataclass(frozen=True)
class Tile:
    loss1: float
    loss2: float
    status: str
    best_db: float | None = None
    best_probability: float | None = None
    fidelity: float | None = None
    max_probability: float = 0.0

    def __post_init__(self):
        if self.status not in (CERTIFIED, UNCERTIFIABLE, INSIGNIFICANT):
            raise DomainError(f"unknown tile status {self.status!r}")
        if (self.fidelity is not None) != (self.status == CERTIFIED):
            raise DomainError("fidelity is reported exactly for certified tiles")

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    @property
    def best_r(self) -> float | None:
        return None if self.best_db is None else db_to_rate(self.best_db).r


def _params(zeta1: float, zeta2: float, m: int, db: float) -> ExperimentParams:
    return ExperimentParams(squeeze=db_to_rate(db), zeta1=zeta1, zeta2=zeta2, m=m)


def optimize_over_squeezing(
    zeta1: float,
    zeta2: float,
    m: int,
    det: DetectorModel,
    campaign: CampaignConfig,
    db_grid: Sequence[float],
    curve: ThresholdCurve,
    key: Sequence[int] = (),
    exhaustive: bool = False,
    losses: tuple[float, float] | None = None,
) -> Tile:
    """Best certified success probability over the squeezing grid for one loss pair.

    The Monte Carlo stream of candidate ``idx`` is keyed by ``(*key, idx)``.
    Candidates whose run would fall under the 1000-sample floor (possible
    only with a reduced shot budget) cannot certify. ``losses`` overrides
    the loss pair echoed in the tile, avoiding ``1 - (1 - loss)`` rounding.
    """
    if curve.m != m:
        raise DomainError(f"curve F_{curve.m} does not match target m={m}")
    loss1, loss2 = losses if losses is not None else (1.0 - zeta1, 1.0 - zeta2)
    candidates = [_params(zeta1, zeta2, m, db) for db in db_grid]
    probs = [herald_probability(p, det) for p in candidates]
    max_prob = max(probs)
    if max_prob < MIN_SUCCESS_PROBABILITY:
        return Tile(loss1, loss2, INSIGNIFICANT, max_probability=max_prob)

    order = sorted(
        (idx for idx, prob in enumerate(probs) if prob >= MIN_SUCCESS_PROBABILITY),
        key=lambda idx: (-probs[idx], idx),
    )
    best = None
    for idx in order:
        p = candidates[idx]
        state = herald_state(p, det, max(campaign.sample_cutoff, m + 1))
        try:
            stats = simulate_ensemble(p, det, campaign, key=(*key, idx), state=state)
        except InsufficientSamplesError:
            continue
        if certify(stats, curve).passed:
            if best is None or probs[idx] > probs[best[0]]:
                best = (idx, state.fidelity(m))
            if not exhaustive:
                break
    if best is None:
        return Tile(loss1, loss2, UNCERTIFIABLE, max_probability=max_prob)
    idx, fidelity = best
    return Tile(
        loss1,
        loss2,
        CERTIFIED,
        best_db=float(db_grid[idx]),
        best_probability=probs[idx],
        fidelity=fidelity,
        max_probability=max_prob,
    )


@dataclass(frozen=True)
class TileMap:
    """Tiles indexed ``tiles[i][j]`` for ``loss1_values[i]`` and ``loss2_values[j]``."""

    loss1_values: tuple[float, ...]
    loss2_values: tuple[float, ...]
    tiles: tuple[tuple[Tile, ...], ...]
    flagged: tuple[tuple[int, int], ...] = field(default=())

    def __iter__(self):
        for row in self.tiles:
            yield from row

    def status_matrix(self) -> np.ndarray:
        return np.array([[t.status for t in row] for row in self.tiles])

    def values(self, attr: str) -> np.ndarray:
        """Matrix of a numeric tile attribute, NaN where absent."""
        return np.array(
            [[np.nan if getattr(t, attr) is None else getattr(t, attr) for t in row] for row in self.tiles],
            dtype=float,
        )


def _tile_job(args):
    (i, j), grid, curve = args
    return optimize_over_squeezing(
        1.0 - grid.loss1_values[i],
        1.0 - grid.loss2_values[j],
        grid.m,
        grid.detector,
        grid.campaign,
        grid.db_grid,
        curve,
        key=(i, j),
        losses=(grid.loss1_values[i], grid.loss2_values[j]),
    )


def run_sweep(
    grid: SweepGrid,
    curve: ThresholdCurve,
    workers: int = 1,
    order: Iterable[tuple[int, int]] | None = None,
) -> TileMap:
    """Evaluate every tile of the grid.

    Tiles draw from streams keyed by their grid indices, so neither
    ``workers`` nor the evaluation ``order`` changes the result.
    """
    n1, n2 = grid.shape
    coords = list(order) if order is not None else [(i, j) for i in range(n1) for j in range(n2)]
    if sorted(coords) != [(i, j) for i in range(n1) for j in range(n2)]:
        raise DomainError("evaluation order must visit every tile exactly once")
    jobs = [((i, j), grid, curve) for i, j in coords]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_tile_job, jobs))
    else:
        results = [_tile_job(job) for job in jobs]
    by_coord = dict(zip(coords, results))
    tiles = tuple(tuple(by_coord[(i, j)] for j in range(n2)) for i in range(n1))
    flagged = monotonicity_exceptions(TileMap(grid.loss1_values, grid.loss2_values, tiles))
    return TileMap(grid.loss1_values, grid.loss2_values, tiles, flagged)


def monotonicity_exceptions(tile_map: TileMap) -> tuple[tuple[int, int], ...]:
    """Smallest set of tiles whose certified status breaks monotonicity in the losses.

    Less loss in either mode should never hurt certification, so the
    certified tiles ideally form a staircase: along increasing heralding
    loss, each row is certified up to a characterization-loss index that
    never grows. The staircase closest to the observed statuses (fewest
    disagreeing tiles) is found by dynamic programming over rows; the
    disagreeing tiles are returned as Monte Carlo noise exceptions.
    """
    rows = np.argsort(tile_map.loss1_values, kind="stable")
    cols = np.argsort(tile_map.loss2_values, kind="stable")
    certified = (tile_map.status_matrix() == CERTIFIED)[np.ix_(rows, cols)]
    n1, n2 = certified.shape
    # cost[i, c]: mismatches in row i if exactly the first c columns are certified
    zeros = np.zeros((n1, 1), dtype=int)
    prefix_uncert = np.hstack([zeros, np.cumsum(~certified, axis=1)])
    suffix_cert = certified.sum(axis=1)[:, None] - np.hstack([zeros, np.cumsum(certified, axis=1)])
    cost = prefix_uncert + suffix_cert
    best = cost[0].copy()
    choice = np.zeros((n1, n2 + 1), dtype=int)
    for i in range(1, n1):
        # previous row's boundary must be >= this row's
        run_min = np.minimum.accumulate(best[::-1])[::-1]
        run_arg = np.empty(n2 + 1, dtype=int)
        arg = n2
        for c in range(n2, -1, -1):
            if best[c] < best[arg]:
                arg = c
            run_arg[c] = arg
        choice[i] = run_arg
        best = cost[i] + run_min
    c = int(np.argmin(best))
    bounds = [0] * n1
    for i in range(n1 - 1, -1, -1):
        bounds[i] = c
        c = int(choice[i, c])
    flagged = []
    for i in range(n1):
        for j in range(n2):
            if certified[i, j] != (j < bounds[i]):
                flagged.append((int(rows[i]), int(cols[j])))
    return tuple(sorted(flagged))


@dataclass(frozen=True)
class FeasibilityContour:
    """Per heralding loss, the largest characterization loss whose tile certifies (``None`` if none)."""

    m: int
    detector: DetectorModel
    boundary: tuple[tuple[float, float | None], ...]

    def increasing_steps(self) -> list[int]:
        """Indices where the tolerable characterization loss grows with heralding loss."""
        values = [v for _, v in self.boundary]
        return [
            k
            for k in range(1, len(values))
            if values[k] is not None and values[k - 1] is not None and values[k] > values[k - 1]
        ]


def extract_thresholds(tile_map: TileMap, m: int = 0, detector: DetectorModel | None = None) -> FeasibilityContour:
    detector = detector or DetectorModel()
    boundary = []
    for i, loss1 in enumerate(tile_map.loss1_values):
        best = None
        for j, loss2 in enumerate(tile_map.loss2_values):
            tile = tile_map.tiles[i][j]
            if tile.certified and tile.best_probability >= MIN_SUCCESS_PROBABILITY:
                if best is None or loss2 > best:
                    best = loss2
        boundary.append((loss1, best))
    return FeasibilityContour(m=m, detector=detector, boundary=tuple(boundary))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return repr(float(value))


def _opt_float(text: str) -> float | None:
    return None if text == "" else float(text)


def tiles_to_csv(tile_map: TileMap) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TILE_COLUMNS)
    for tile in tile_map:
        writer.writerow(
            [_fmt(tile.loss1), _fmt(tile.loss2), tile.status, _fmt(tile.best_db), _fmt(tile.best_probability), _fmt(tile.fidelity)]
        )
    return buf.getvalue()


def tiles_from_csv(text: str) -> TileMap:
    """Rebuild a rectangular tile map from its CSV form."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or tuple(rows[0].keys()) != TILE_COLUMNS:
        raise DomainError("not a tile-map CSV")
    loss1 = sorted({float(r["loss1"]) for r in rows})
    loss2 = sorted({float(r["loss2"]) for r in rows})
    if len(rows) != len(loss1) * len(loss2):
        raise DomainError("tile map is not rectangular")
    lookup = {}
    for r in rows:
        tile = Tile(
            float(r["loss1"]),
            float(r["loss2"]),
            r["status"],
            best_db=_opt_float(r["best_r_db"]),
            best_probability=_opt_float(r["best_probability"]),
            fidelity=_opt_float(r["fidelity"]),
        )
        lookup[(tile.loss1, tile.loss2)] = tile
    tiles = tuple(tuple(lookup[(a, b)] for b in loss2) for a in loss1)
    return TileMap(tuple(loss1), tuple(loss2), tiles)


def contour_to_csv(contour: FeasibilityContour) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CONTOUR_COLUMNS)
    for loss1, loss2 in contour.boundary:
        writer.writerow([_fmt(loss1), _fmt(loss2)])
    return buf.getvalue()


def contour_from_csv(text: str, m: int = 0, detector: DetectorModel | None = None) -> FeasibilityContour:
    rows = list(csv.DictReader(io.StringIO(text)))
    boundary = tuple((float(r["loss1"]), _opt_float(r["max_loss2"])) for r in rows)
    return FeasibilityContour(m=m, detector=detector or DetectorModel(), boundary=boundary)
