"""Render a validated PlotSpec to an image file.

Rendering is pure with respect to its inputs: the same CSV and spec
produce byte-identical output under a pinned matplotlib version (the Agg
backend is forced and no timestamps are embedded).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .spec import PlotSpec

DPI = 150
_PNG_METADATA = {"Software": "figplots"}


class SchemaError(ValueError):
    """Raised when a CSV does not match the schema its plot kind expects."""


@dataclass(frozen=True)
class RenderResult:
    path: Path
    color_range: tuple[float, float] | None = None


def _read_csv(path: Path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    return frame


def _grid_from_long(frame: pd.DataFrame, path: Path):
    """Pivot a long-format (t, index, value) table into a dense grid."""
    cols = list(frame.columns)
    if len(cols) != 3:
        raise SchemaError(
            f"{path}: expected three columns (t, <index>, <value>), got {cols}"
        )
    t_col, idx_col, val_col = cols
    pivot = frame.pivot(index=t_col, columns=idx_col, values=val_col)
    if pivot.isna().any().any():
        raise SchemaError(f"{path}: grid has missing ({t_col}, {idx_col}) entries")
    return (
        pivot.index.to_numpy(float),
        pivot.columns.to_numpy(float),
        pivot.to_numpy(float),
        (t_col, idx_col, val_col),
    )


def _save(fig, spec: PlotSpec) -> None:
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, dpi=DPI, metadata=_PNG_METADATA)
    plt.close(fig)


def _labels(ax, spec: PlotSpec, default_x: str, default_y: str) -> None:
    ax.set_xlabel(spec.x_label or default_x)
    ax.set_ylabel(spec.y_label or default_y)
    if spec.title:
        ax.set_title(spec.title)


def _render_heatmap(spec: PlotSpec, frame: pd.DataFrame) -> RenderResult:
    times, index, grid, (t_col, idx_col, _) = _grid_from_long(frame, spec.input)
    if spec.color_range == "symmetric":
        bound = float(np.abs(grid).max()) or 1.0
        vmin, vmax = -bound, bound
        cmap = "RdBu_r"
    elif spec.color_range is not None:
        vmin, vmax = spec.color_range
        cmap = "viridis"
    else:
        vmin, vmax = float(grid.min()), float(grid.max())
        cmap = "viridis"

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    mesh = ax.pcolormesh(index, times, grid, cmap=cmap, vmin=vmin, vmax=vmax,
                         shading="nearest", rasterized=True)
    fig.colorbar(mesh, ax=ax)
    _labels(ax, spec, idx_col, t_col)
    _save(fig, spec)
    return RenderResult(spec.output, (vmin, vmax))


def _render_lines(spec: PlotSpec, frame: pd.DataFrame) -> RenderResult:
    cols = list(frame.columns)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if len(cols) == 2:
        x_col, y_col = cols
        ax.plot(frame[x_col], frame[y_col])
    elif len(cols) == 3:
        x_col, group_col, y_col = cols
        for key, sub in frame.groupby(group_col, sort=True):
            ax.plot(sub[x_col], sub[y_col], label=f"{group_col}={key}")
        ax.legend()
    else:
        raise SchemaError(
            f"{spec.input}: expected two columns (x, y) or three columns "
            f"(t, <group>, <value>), got {cols}"
        )
    _labels(ax, spec, x_col, y_col)
    _save(fig, spec)
    return RenderResult(spec.output)


def _render_orbit(spec: PlotSpec, frame: pd.DataFrame) -> RenderResult:
    _, index, grid, (_, idx_col, val_col) = _grid_from_long(frame, spec.input)
    positions = {int(v): k for k, v in enumerate(index)}
    missing = [v for v in spec.pair if v not in positions]
    if missing:
        raise SchemaError(
            f"{spec.input}: {idx_col} values {missing} not present "
            f"(available: {sorted(positions)})"
        )
    a, b = (positions[v] for v in spec.pair)
    xs, ys = grid[:, a].copy(), grid[:, b].copy()
    wrap = spec.extra.get("wrap")
    if wrap is not None:
        wrap = float(wrap)
        xs %= wrap
        ys %= wrap
        # break the line where wrapping jumps across the domain
        jump = (np.abs(np.diff(xs)) > wrap / 2) | (np.abs(np.diff(ys)) > wrap / 2)
        xs[1:][jump] = np.nan
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(xs, ys, lw=1.0)
    ax.plot([xs[0]], [ys[0]], marker="o", ms=4)
    ax.set_aspect("equal", adjustable="datalim")
    _labels(
        ax, spec,
        f"{val_col}[{idx_col}={spec.pair[0]}]",
        f"{val_col}[{idx_col}={spec.pair[1]}]",
    )
    _save(fig, spec)
    return RenderResult(spec.output)


def _render_scatter(spec: PlotSpec, frame: pd.DataFrame) -> RenderResult:
    missing = [c for c in (spec.x, spec.y) if c not in frame.columns]
    if missing:
        raise SchemaError(
            f"{spec.input}: missing columns {missing} "
            f"(available: {list(frame.columns)})"
        )
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.scatter(frame[spec.x], frame[spec.y], s=6, alpha=0.7, linewidths=0)
    _labels(ax, spec, spec.x, spec.y)
    _save(fig, spec)
    return RenderResult(spec.output)


_RENDERERS = {
    "heatmap": _render_heatmap,
    "lines": _render_lines,
    "orbit": _render_orbit,
    "scatter": _render_scatter,
}


def render(spec: PlotSpec) -> RenderResult:
    """Render one figure; returns the output path and the color range used."""
    frame = _read_csv(spec.input)
    return _RENDERERS[spec.kind](spec, frame)
