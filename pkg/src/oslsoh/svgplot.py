"""Minimal self-contained SVG line charts.

Output depends only on the input numbers, so identical data gives
byte-identical files.
"""

from __future__ import annotations

import math
from html import escape
from typing import Sequence

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")

WIDTH = 640
PANEL_HEIGHT = 220
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 20, 30, 40


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * abs(step):
        ticks.append(round(t, 12))
        t += step
    return ticks


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.2e}"
    return f"{v:.6g}"


class Panel:
    def __init__(self, title: str = "", xlabel: str = "", ylabel: str = "", xticklabels: Sequence[str] | None = None):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.xticklabels = xticklabels
        self.series: list[tuple[str, list[float], list[float]]] = []

    def add(self, label: str, xs: Sequence[float], ys: Sequence[float]) -> "Panel":
        if len(xs) != len(ys):
            raise ValueError(f"series {label!r}: {len(xs)} x values vs {len(ys)} y values")
        self.series.append((label, [float(x) for x in xs], [float(y) for y in ys]))
        return self

    def _render(self, top: float, out: list[str]) -> None:
        xs = [x for _, sx, _ in self.series for x in sx]
        ys = [y for _, _, sy in self.series for y in sy if math.isfinite(y)]
        if not xs or not ys:
            raise ValueError(f"panel {self.title!r} has no finite data")
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            pad = abs(y0) * 0.05 or 1.0
            y0, y1 = y0 - pad, y1 + pad
        pad = 0.05 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad
        left, right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
        ph = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        ptop = top + MARGIN_TOP

        def px(x):
            return left + (x - x0) / (x1 - x0) * (right - left)

        def py(y):
            return ptop + (y1 - y) / (y1 - y0) * ph

        out.append(f'<rect x="{left}" y="{_fmt(ptop)}" width="{right - left}" height="{ph}" '
                   'fill="none" stroke="#333" stroke-width="1"/>')
        if self.title:
            out.append(f'<text x="{(left + right) / 2:.1f}" y="{_fmt(top + 20)}" text-anchor="middle" '
                       f'font-size="14">{escape(self.title)}</text>')
        for t in _nice_ticks(y0, y1):
            y = py(t)
            out.append(f'<line x1="{left - 4}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="#333"/>')
            out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end" font-size="10">'
                       f'{_tick_label(t)}</text>')
        if self.xticklabels is not None:
            xticks = [(i, lab) for i, lab in enumerate(self.xticklabels)]
        else:
            xticks = [(t, _tick_label(t)) for t in _nice_ticks(x0, x1)]
        base = ptop + ph
        for t, lab in xticks:
            x = px(t)
            out.append(f'<line x1="{_fmt(x)}" y1="{_fmt(base)}" x2="{_fmt(x)}" y2="{_fmt(base + 4)}" stroke="#333"/>')
            out.append(f'<text x="{_fmt(x)}" y="{_fmt(base + 16)}" text-anchor="middle" font-size="10">'
                       f'{escape(str(lab))}</text>')
        if self.xlabel:
            out.append(f'<text x="{(left + right) / 2:.1f}" y="{_fmt(base + 32)}" text-anchor="middle" '
                       f'font-size="11">{escape(self.xlabel)}</text>')
        if self.ylabel:
            cy = ptop + ph / 2
            out.append(f'<text x="14" y="{_fmt(cy)}" text-anchor="middle" font-size="11" '
                       f'transform="rotate(-90 14 {_fmt(cy)})">{escape(self.ylabel)}</text>')
        for i, (label, sx, sy) in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(sx, sy) if math.isfinite(y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
            if len(self.series) > 1 or label:
                ly = ptop + 14 + 14 * i
                out.append(f'<line x1="{right - 110}" y1="{_fmt(ly - 4)}" x2="{right - 92}" y2="{_fmt(ly - 4)}" '
                           f'stroke="{color}" stroke-width="2"/>')
                out.append(f'<text x="{right - 88}" y="{_fmt(ly)}" font-size="10">{escape(label)}</text>')


def render(panels: Sequence[Panel]) -> str:
    height = PANEL_HEIGHT * len(panels)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">',
        f'<rect width="{WIDTH}" height="{height}" fill="white"/>',
    ]
    for i, panel in enumerate(panels):
        panel._render(i * PANEL_HEIGHT, out)
    out.append("</svg>")
    return "\n".join(out) + "\n"
