"""Delimited outputs and figure rendering for the CLI report path.

Every CSV starts with a single '#'-prefixed provenance comment (tool version,
seed, model digest) followed by a header row; numbers are written with 17
significant digits so the files round-trip doubles exactly.  Figures are
rendered with the Agg backend and no timestamp metadata, so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__

__all__ = [
    "provenance",
    "write_csv",
    "write_json",
    "write_yield_curve_csv",
    "write_coefficient_csv",
    "write_power_surface_csv",
    "write_density_csv",
    "write_paths_csv",
    "save_figure",
    "line_figure",
]


def provenance(seed: Optional[int] = None, model: Optional[str] = None) -> str:
    parts = [f"polyterm {__version__}"]
    if seed is not None:
        parts.append(f"seed={seed}")
    if model is not None:
        parts.append(f"model={model}")
    return "# " + " ".join(parts)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comment: str) -> None:
    lines = [comment, ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_yield_curve_csv(path, ts, ttms, z: float, comment: str) -> None:
    rows = []
    for ttm in ttms:
        price = ts.bond_price(ttm, z)
        rows.append((ttm, price, ts.yield_curve(ttm, z)))
    write_csv(path, ["ttm", "price", "yield"], rows, comment)


def write_coefficient_csv(path, ts, xs, comment: str) -> None:
    n = ts.spec.n
    header = ["x"] + [f"g_{i}" for i in range(n + 1)]
    rows = [(x, *ts.solve_G(x)) for x in xs]
    write_csv(path, header, rows, comment)


def write_power_surface_csv(path, spec, thetas, ttms, s: float, z: float, comment: str) -> None:
    from .volatility import ThetaSolution, implied_forward_variance, power_price

    rows = []
    for theta in thetas:
        fwd0 = implied_forward_variance(spec, theta, 0.0, z)
        for ttm in ttms:
            rows.append((float(theta), ttm, power_price(spec, theta, ttm, s, z), fwd0))
    write_csv(
        path,
        ["theta", "ttm", "price", "implied_forward_variance_at_0"],
        rows,
        comment,
    )


def write_density_csv(path, density, comment: str) -> None:
    rows = zip(density.grid, density.pdf(density.grid), density.cdf_grid)
    write_csv(path, ["y", "pdf", "cdf"], rows, comment)


def write_paths_csv(path, paths, comment: str, max_paths: int = 20) -> None:
    """Sample-path table: one z (and s) column per shown path."""
    k = min(max_paths, paths.z.shape[0])
    header = ["t"] + [f"z_{j}" for j in range(k)]
    if paths.s is not None:
        header += [f"s_{j}" for j in range(k)]
    rows = []
    for i, t in enumerate(paths.times):
        row = [t] + list(paths.z[:k, i])
        if paths.s is not None:
            row += list(paths.s[:k, i])
        rows.append(row)
    write_csv(path, header, rows, comment)


def save_figure(fig, path) -> None:
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def line_figure(x, ys, labels, xlabel: str, ylabel: str, title: str):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for y, label in zip(ys, labels):
        ax.plot(x, y, lw=1.0, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if any(label for label in labels):
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig
