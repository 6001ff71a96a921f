"""Output emission: delimited tables, JSON results and rendered figures.

All files are written atomically (temp file in the target directory, then
rename) so a crashed run never leaves a half-written table behind.  Figures
use the Agg backend and never require a display.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "write_text_atomic",
    "write_json",
    "write_density_csv",
    "write_sensitivity_csv",
    "write_design_json",
    "render_density_figure",
    "render_sensitivity_figure",
]


def write_text_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


class _ArrayEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.floating, np.integer, np.bool_)):
            return obj.item()
        return super().default(obj)


def write_json(path, payload) -> Path:
    return write_text_atomic(path, json.dumps(payload, indent=2, cls=_ArrayEncoder) + "\n")


def write_density_csv(path, density) -> Path:
    """Table of the optimized density and its CDF on the quadrature grid."""
    lines = ["t,phi,cdf"]
    for t, phi, cdf in zip(density.ts, density.phi, density.cdf):
        lines.append(f"{t:.12g},{phi:.12g},{cdf:.12g}")
    return write_text_atomic(path, "\n".join(lines) + "\n")


def write_sensitivity_csv(path, result) -> Path:
    """Efficiency over the local parameter grid, one row per node."""
    k = len(result.axes)
    header = ",".join(f"beta{i + 1}" for i in range(k)) + ",efficiency"
    lines = [header]
    for row in result.rows():
        lines.append(",".join(f"{v:.12g}" for v in row))
    return write_text_atomic(path, "\n".join(lines) + "\n")


def write_design_json(path, points, meta=None) -> Path:
    payload = {"points": [float(t) for t in np.asarray(points)]}
    if meta:
        payload.update(meta)
    return write_json(path, payload)


def render_density_figure(path, density, designs=None) -> Path:
    """Density and CDF panels, with any exact designs marked on the axis.

    designs: mapping of label -> points.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, (ax_phi, ax_cdf) = plt.subplots(1, 2, figsize=(10, 4))
    ax_phi.plot(density.ts, density.phi, lw=1.8)
    ax_phi.set_xlabel("t")
    ax_phi.set_ylabel("density")
    ax_phi.set_title("Design density")
    ax_cdf.plot(density.ts, density.cdf, lw=1.8)
    ax_cdf.set_xlabel("t")
    ax_cdf.set_ylabel("cumulative")
    ax_cdf.set_title("Cumulative distribution")
    if designs:
        markers = ["o", "s", "^", "d", "v"]
        for i, (label, pts) in enumerate(designs.items()):
            pts = np.asarray(pts, dtype=float)
            ax_phi.plot(
                pts, np.zeros_like(pts), markers[i % len(markers)],
                ms=6, clip_on=False, label=label,
            )
        ax_phi.legend(loc="best", fontsize=8)
    for ax in (ax_phi, ax_cdf):
        ax.margins(x=0.02)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_sensitivity_figure(path, result) -> Path:
    """Render the efficiency grid: heatmap for two axes, line plot for one."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    varying = [(i, ax) for i, ax in enumerate(result.axes) if len(ax) > 1]
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    if len(varying) >= 2:
        (i1, ax1), (i2, ax2) = varying[0], varying[1]
        # values has one axis per parameter; squeeze out pinned ones.
        grid = np.squeeze(result.values)
        if grid.ndim != 2:
            grid = grid.reshape(len(ax1), len(ax2))
        im = ax.pcolormesh(ax2, ax1, grid, shading="nearest", cmap="viridis")
        fig.colorbar(im, ax=ax, label="efficiency")
        ax.set_xlabel(f"beta{i2 + 1}")
        ax.set_ylabel(f"beta{i1 + 1}")
        ax.set_title("Design efficiency over local parameters")
    elif len(varying) == 1:
        i1, ax1 = varying[0]
        ax.plot(ax1, np.squeeze(result.values), "o-")
        ax.set_xlabel(f"beta{i1 + 1}")
        ax.set_ylabel("efficiency")
        ax.set_title("Design efficiency over local parameters")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
