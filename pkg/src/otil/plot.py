"""Self-contained SVG learning-curve charts from summary CSVs."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .harness import CsvError, read_csv

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 150, 30, 55
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def load_summary(path) -> tuple[str, np.ndarray, np.ndarray, np.ndarray]:
    header, rows = read_csv(path)
    if header != ["episode", "mean", "std"]:
        raise CsvError(f"{path}: expected columns episode,mean,std, got {','.join(header)}")
    name = Path(path).stem
    name = name[len("summary_"):] if name.startswith("summary_") else name
    return name, rows[:, 0], rows[:, 1], rows[:, 2]


def render_svg(series: list[tuple[str, np.ndarray, np.ndarray, np.ndarray]], title: str = "") -> str:
    """One line per series (mean vs episode) over a shaded mean +- std band."""
    if not series:
        raise ValueError("nothing to plot")
    xs = np.concatenate([s[1] for s in series]) if any(len(s[1]) for s in series) else np.array([0.0, 1.0])
    lows = np.concatenate([s[2] - s[3] for s in series] + [np.zeros(0)])
    highs = np.concatenate([s[2] + s[3] for s in series] + [np.zeros(0)])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = (float(lows.min()), float(highs.max())) if lows.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN_T + (y1 - y) / (y1 - y0) * ph

    def pts(x, y):
        return " ".join(f"{sx(a):.4f},{sy(b):.4f}" for a, b in zip(x, y))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{MARGIN_L + pw / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(
        f'<g id="axes" stroke="black" fill="none"><rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}"/></g>'
    )
    out.append('<g id="ticks" font-size="11">')
    for t in _nice_ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.4f}" y1="{MARGIN_T + ph}" x2="{sx(t):.4f}" y2="{MARGIN_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.4f}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y0, y1):
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{sy(t):.4f}" x2="{MARGIN_L}" y2="{sy(t):.4f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{sy(t) + 4:.4f}" text-anchor="end">{t:g}</text>')
    out.append("</g>")
    out.append(f'<text x="{MARGIN_L + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle">episode</text>')
    out.append(
        f'<text x="18" y="{MARGIN_T + ph / 2}" text-anchor="middle" transform="rotate(-90 18 {MARGIN_T + ph / 2})">mean moving reward</text>'
    )

    out.append(f'<g id="data" data-x0="{x0!r}" data-x1="{x1!r}" data-y0="{y0!r}" data-y1="{y1!r}">')
    for i, (name, ep, mean, std) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        if len(ep):
            band = pts(ep, mean + std) + " " + pts(ep[::-1], (mean - std)[::-1])
            out.append(f'<polygon class="band" data-series={quoteattr(name)} points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
            out.append(f'<polyline class="mean" data-series={quoteattr(name)} points="{pts(ep, mean)}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    out.append("</g>")

    out.append('<g id="legend">')
    for i, (name, *_rest) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        y = MARGIN_T + 12 + 20 * i
        lx = MARGIN_L + pw + 15
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 25}" y2="{y}" stroke="{color}" stroke-width="3"/>')
        out.append(f'<text class="legend-entry" x="{lx + 32}" y="{y + 4}">{escape(name)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_summaries(paths, out_path, title: str = "") -> Path:
    series = [load_summary(p) for p in paths]
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(render_svg(series, title))
    return out_path
