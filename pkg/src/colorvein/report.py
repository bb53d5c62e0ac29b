"""Deterministic artifact writers: JSON reports, score CSVs, SVG histograms.

Everything except the stamp is byte-stable across reruns with the same
config and seeds; wall-clock time appears only in the stamp.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_stamp(out_dir, config_hash: str, seeds: dict) -> None:
    """Reproducibility stamp; the only artifact carrying a timestamp."""
    write_json(Path(out_dir) / "stamp.json", {
        "config_hash": config_hash,
        "seeds": seeds,
        "library_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    })


def write_scores_csv(path, labelled_scores: dict) -> None:
    """CSV with rows (label, score), lists concatenated in key order."""
    lines = ["label,score"]
    for label in sorted(labelled_scores):
        scores = labelled_scores[label]
        if scores is None:
            continue
        for s in np.asarray(scores):
            lines.append(f"{label},{s!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def svg_histogram(labelled_scores: dict, bins: int = 60, width: int = 640,
                  height: int = 360, lo: float = -1.0, hi: float = 1.0) -> str:
    """Overlayed score histograms as a small hand-rolled SVG (deterministic
    bytes, unlike figure libraries that embed creation metadata)."""
    colors = ["#2c7fb8", "#d95f02", "#1b9e77", "#e7298a", "#756bb1"]
    edges = np.linspace(lo, hi, bins + 1)
    series = []
    peak = 0.0
    for i, label in enumerate(sorted(labelled_scores)):
        scores = labelled_scores[label]
        if scores is None:
            continue
        dens = np.histogram(np.asarray(scores), bins=edges, density=True)[0]
        peak = max(peak, float(dens.max(initial=0.0)))
        series.append((label, dens, colors[i % len(colors)]))
    peak = peak or 1.0
    margin, legend_h = 40, 18 * len(series)
    plot_w, plot_h = width - 2 * margin, height - 2 * margin - legend_h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin - legend_h}" x2="{width - margin}" '
        f'y2="{height - margin - legend_h}" stroke="black"/>',
    ]
    bar_w = plot_w / bins
    for si, (label, dens, color) in enumerate(series):
        for b in range(bins):
            if dens[b] <= 0:
                continue
            bar_h = plot_h * dens[b] / peak
            x = margin + b * bar_w + si * bar_w / max(len(series), 1) * 0.0
            y = height - margin - legend_h - bar_h
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                f'height="{bar_h:.2f}" fill="{color}" fill-opacity="0.45"/>'
            )
        ly = height - legend_h + 14 * si
        parts.append(f'<rect x="{margin}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{margin + 14}" y="{ly}" font-size="12">{label}</text>')
    for tick in (lo, (lo + hi) / 2, hi):
        tx = margin + (tick - lo) / (hi - lo) * plot_w
        parts.append(
            f'<text x="{tx:.2f}" y="{height - margin - legend_h + 14}" '
            f'font-size="11" text-anchor="middle">{tick:g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg_histogram(path, labelled_scores: dict, **kwargs) -> None:
    Path(path).write_text(svg_histogram(labelled_scores, **kwargs))
