"""CSV tables, dataset files and a minimal SVG line plot."""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from ..risklab import Dataset, GeneratorSpec


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def parse_cell(s: str):
    """Inverse of :func:`format_cell`; non-numeric cells come back as strings."""
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def render_csv(header: Sequence[str], rows: Sequence[Sequence], footer: Sequence[str] = ()) -> str:
    width = len(header)
    lines = [",".join(header)]
    for row in rows:
        if len(row) != width:
            raise ValueError(f"row has {len(row)} cells, header has {width}")
        lines.append(",".join(format_cell(v) for v in row))
    lines.extend(f"# {line}" for line in footer)
    return "\n".join(lines) + "\n"


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_csv(path: Path) -> tuple[list[str], list[list]]:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").split("\n") if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [[parse_cell(c) if c else None for c in ln.split(",")] for ln in lines[1:]]


# -- dataset files -------------------------------------------------------------


def dataset_sidecar(data: Dataset) -> dict:
    spec = asdict(data.spec)
    spec["domain"] = list(spec["domain"])
    spec["true_coefficients"] = list(spec["true_coefficients"])
    return {"format": "bayesdd-dataset", "version": 1, "seed": data.seed, "spec": spec}


def write_dataset(data: Dataset, csv_path: Path) -> Path:
    rows = list(zip(data.x, data.y, data.f_true_at_x))
    write_text(csv_path, render_csv(["x", "y", "f_true"], rows))
    side = csv_path.with_suffix(".json")
    write_text(side, json.dumps(dataset_sidecar(data), indent=2, sort_keys=True) + "\n")
    return side


def read_dataset(csv_path: Path) -> Dataset:
    """Load a dataset CSV and its JSON sidecar (same stem, ``.json``)."""
    csv_path = Path(csv_path)
    header, rows = read_csv(csv_path)
    if header != ["x", "y", "f_true"]:
        raise ValueError(f"{csv_path}: expected columns x,y,f_true, got {','.join(header)}")
    arr = np.array(rows, dtype=float)
    meta = json.loads(csv_path.with_suffix(".json").read_text(encoding="utf-8"))
    s = meta["spec"]
    spec = GeneratorSpec(
        true_degree=s["true_degree"],
        true_coefficients=tuple(s["true_coefficients"]),
        noise_sd=s["noise_sd"],
        n=s["n"],
        x_design=s["x_design"],
        domain=tuple(s["domain"]),
    )
    cols = [np.ascontiguousarray(arr[:, k]) for k in range(3)]
    return Dataset(*cols, spec, meta["seed"])


# -- SVG -------------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=40, bottom=50)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.3g}"


def line_plot_svg(series: dict[str, tuple[Sequence[float], Sequence[float]]], title: str = "",
                  xlabel: str = "", ylabel: str = "", log_y: bool = False) -> str:
    """One polyline per series with axes, five ticks per axis and a legend.

    With ``log_y`` nonpositive or non-finite values are dropped.
    """
    cleaned = {}
    for name, (xs, ys) in series.items():
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        if log_y:
            keep &= ys > 0
            ys = np.where(keep, np.log10(np.where(ys > 0, ys, 1.0)), 0.0)
        cleaned[name] = (xs[keep], ys[keep])
    allx = np.concatenate([v[0] for v in cleaned.values()] or [np.zeros(0)])
    ally = np.concatenate([v[1] for v in cleaned.values()] or [np.zeros(0)])
    if allx.size == 0:
        allx, ally = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1
    if y0 == y1:
        y0, y1 = y0 - 1, y1 + 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
    ]
    left, bottom = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{left + pw}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<line x1="{_fmt(sx(xv))}" y1="{bottom}" x2="{_fmt(sx(xv))}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(xv))}" y="{bottom + 18}" text-anchor="middle" font-size="11">'
                   f'{_tick_label(xv)}</text>')
        label = _tick_label(10**yv) if log_y else _tick_label(yv)
        out.append(f'<line x1="{left - 5}" y1="{_fmt(sy(yv))}" x2="{left}" y2="{_fmt(sy(yv))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_fmt(sy(yv) + 4)}" text-anchor="end" font-size="11">{label}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle" font-size="13">'
               f'{escape(xlabel)}</text>')
    ylab = f"{ylabel} (log scale)" if log_y and ylabel else ylabel
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.2f}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.2f})">{escape(ylab)}</text>')
    for i, (name, (xs, ys)) in enumerate(cleaned.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN["top"] + 14 + 16 * i
        out.append(f'<line x1="{left + pw - 150}" y1="{ly - 4}" x2="{left + pw - 130}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 125}" y="{ly}" font-size="12">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
