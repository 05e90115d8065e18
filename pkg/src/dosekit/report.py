"""Deterministic report emission: canonical JSON, CSV series, and a
minimal hand-rolled SVG renderer for violin plots.

Primary outputs never contain timestamps or environment details, so a
rerun with identical inputs is byte-identical; anything volatile goes
into a separate run log.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_series_csv(path, header: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _violin_outline(values: np.ndarray, n_bins: int = 24) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        hi = lo + 1e-9
    hist, edges = np.histogram(values, bins=n_bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = hist / max(hist.max(), 1)
    return centers, width


def violin_svg(path, series: dict[str, np.ndarray], title: str,
               width: int = 480, height: int = 320) -> None:
    """One violin per named series, rendered as mirrored density polygons."""
    names = list(series)
    all_vals = np.concatenate([np.asarray(v, dtype=np.float64) for v in series.values()])
    vlo, vhi = float(all_vals.min()), float(all_vals.max())
    if vhi <= vlo:
        vhi = vlo + 1e-9
    pad = 0.08 * (vhi - vlo)
    vlo -= pad
    vhi += pad
    plot_top, plot_bottom = 36, height - 28
    slot = (width - 60) / max(len(names), 1)

    def y_of(v):
        return plot_bottom - (v - vlo) / (vhi - vlo) * (plot_bottom - plot_top)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>',
    ]
    for i, name in enumerate(names):
        vals = np.asarray(series[name], dtype=np.float64)
        cx = 60 + slot * (i + 0.5)
        centers, widths = _violin_outline(vals)
        half = 0.38 * slot
        right = [(cx + w * half, y_of(c)) for c, w in zip(centers, widths)]
        left = [(cx - w * half, y_of(c)) for c, w in zip(centers[::-1], widths[::-1])]
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in right + left)
        parts.append(
            f'<polygon points="{points}" fill="#7aa6c2" fill-opacity="0.6" '
            f'stroke="#33596e" stroke-width="1"/>'
        )
        med = y_of(float(np.median(vals)))
        parts.append(
            f'<line x1="{cx - half:.2f}" y1="{med:.2f}" x2="{cx + half:.2f}" '
            f'y2="{med:.2f}" stroke="#1c1c1c" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{cx:.1f}" y="{height - 10}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{name}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        v = vlo + frac * (vhi - vlo)
        parts.append(
            f'<text x="8" y="{y_of(v) + 4:.1f}" font-family="sans-serif" '
            f'font-size="10">{v:.3f}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
