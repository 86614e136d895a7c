"""Figure rendering for sweep and certification outputs.

All figures go through the non-interactive Agg backend and are written with
fixed SVG ids and no timestamp, so rerunning a command reproduces the files
byte for byte.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap, LogNorm, Normalize  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .certify import BOX_SIGMAS, CertificationVerdict, ThresholdCurve  # noqa: E402
from .sweep import UNCERTIFIABLE, FeasibilityContour, TileMap  # noqa: E402

__all__ = ["render_tile_heatmap", "render_contours", "render_certification", "save_figure"]

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "svg.hashsalt": "fockcert",
    "svg.fonttype": "path",
}

ORDER_COLORS = {3: "black", 4: "tab:red", 5: "tab:blue"}
UNCERTIFIABLE_COLOR = "0.85"


def save_figure(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".") or "svg"
    metadata = {"Date": None} if fmt == "svg" else None
    fig.savefig(path, format=fmt, metadata=metadata, bbox_inches="tight")
    plt.close(fig)
    return path


def _edges(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float) * 100.0
    if v.size == 1:
        return np.array([v[0] - 0.5, v[0] + 0.5])
    mid = (v[1:] + v[:-1]) / 2
    return np.concatenate([[2 * v[0] - mid[0]], mid, [2 * v[-1] - mid[-1]]])


def render_tile_heatmap(tile_map: TileMap, metric: str, path, title: str = "") -> Path:
    """Heatmap of ``best_probability`` (log scale) or ``fidelity`` over the loss plane.

    Insignificant tiles stay white; tiles with enough events that never
    certify are drawn light grey.
    """
    if metric not in ("best_probability", "fidelity"):
        raise ValueError(f"unknown metric {metric!r}")
    status = tile_map.status_matrix()
    values = np.ma.masked_invalid(tile_map.values(metric))
    x_edges = _edges(tile_map.loss1_values)
    y_edges = _edges(tile_map.loss2_values)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.4))
        grey = np.ma.masked_where(status != UNCERTIFIABLE, np.ones(status.shape))
        ax.pcolormesh(x_edges, y_edges, grey.T, cmap=ListedColormap([UNCERTIFIABLE_COLOR]), vmin=0, vmax=1)
        if metric == "best_probability":
            finite = values.compressed()
            lo = finite.min() if finite.size else 1e-5
            hi = finite.max() if finite.size else 1.0
            norm = LogNorm(vmin=min(lo, hi / 10), vmax=hi)
            label = "success probability"
        else:
            norm = Normalize(vmin=0.0, vmax=1.0)
            label = "fidelity"
        if values.count():
            mesh = ax.pcolormesh(x_edges, y_edges, values.T, cmap="viridis", norm=norm)
            fig.colorbar(mesh, ax=ax, label=label)
        ax.set_xlim(x_edges[0], x_edges[-1])
        ax.set_ylim(y_edges[0], y_edges[-1])
        ax.set_xlabel("heralding loss (%)")
        ax.set_ylabel("characterization loss (%)")
        if title:
            ax.set_title(title)
        return save_figure(fig, path)


def _line_style(label: str) -> str:
    if label.startswith("cap"):
        n = int(label[3:])
        return "--" if n >= 20 else (":" if n <= 10 else "-.")
    return "-"


def render_contours(contours: Sequence[FeasibilityContour], path, title: str = "") -> Path:
    """Tolerable characterization loss against heralding loss, one line per (m, detector)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        for contour in contours:
            pts = [(a * 100, b * 100) for a, b in contour.boundary if b is not None]
            if not pts:
                continue
            xs, ys = zip(*pts)
            label = contour.detector.label()
            ax.plot(
                xs,
                ys,
                linestyle=_line_style(label),
                color=ORDER_COLORS.get(contour.m, "tab:green"),
                marker="o",
                markersize=2.5,
                label=f"m={contour.m}, {label.upper()}",
            )
        ax.set_xlabel("heralding loss (%)")
        ax.set_ylabel("tolerable characterization loss (%)")
        ax.set_xlim(left=0)
        ax.set_ylim(bottom=0)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        return save_figure(fig, path)


def render_certification(verdict: CertificationVerdict, curve: ThresholdCurve, path) -> Path:
    """Witness plane with the threshold curve and the three-sigma box of one ensemble."""
    s = verdict.stats
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.2))
        xs = np.linspace(0.0, 1.0, 401)
        fs = np.interp(xs, curve.xs, curve.fs)
        ax.plot(xs, fs, color="tab:blue", label=f"$F_{{{curve.m}}}$ ({curve.provenance or 'table'})")
        ax.fill_between(xs, 0, fs, color="tab:blue", alpha=0.12, linewidth=0)
        color = "tab:blue" if verdict.passed else "tab:red"
        ax.add_patch(
            Rectangle(
                (s.mean_x - BOX_SIGMAS * s.sd_x, s.mean_y - BOX_SIGMAS * s.sd_y),
                2 * BOX_SIGMAS * s.sd_x,
                2 * BOX_SIGMAS * s.sd_y,
                fill=False,
                edgecolor=color,
            )
        )
        ax.plot([s.mean_x], [s.mean_y], "o", color=color, markersize=3)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_xlabel(f"$x_{{{s.m}}}$")
        ax.set_ylabel(f"$y_{{{s.m}}}$")
        ax.legend(frameon=False, loc="upper right")
        ax.set_title("pass" if verdict.passed else "fail")
        return save_figure(fig, path)
