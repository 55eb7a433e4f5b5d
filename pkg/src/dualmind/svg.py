"""Tiny deterministic SVG charts: axes, polylines, grouped bars and labels."""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 480, 300
MARGIN = {"left": 50, "right": 110, "top": 30, "bottom": 40}


def _f(x: float) -> str:
    return f"{x:.2f}"


class _Frame:
    """Maps data coordinates onto the plot area."""

    def __init__(self, x_range, y_range, width=WIDTH, height=HEIGHT):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.left = MARGIN["left"]
        self.right = width - MARGIN["right"]
        self.top = MARGIN["top"]
        self.bottom = height - MARGIN["bottom"]
        self.width, self.height = width, height

    def px(self, x: float) -> float:
        return self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y: float) -> float:
        return self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)


def _header(frame: _Frame, title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{frame.width}" height="{frame.height}" '
        f'viewBox="0 0 {frame.width} {frame.height}">',
        f"<title>{escape(title)}</title>",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{_f(frame.width / 2)}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]


def _axes(frame: _Frame, xlabel: str, ylabel: str, y_ticks: Sequence[float]) -> list[str]:
    out = [
        f'<line class="axis" x1="{_f(frame.left)}" y1="{_f(frame.bottom)}" x2="{_f(frame.right)}" '
        f'y2="{_f(frame.bottom)}" stroke="black"/>',
        f'<line class="axis" x1="{_f(frame.left)}" y1="{_f(frame.top)}" x2="{_f(frame.left)}" '
        f'y2="{_f(frame.bottom)}" stroke="black"/>',
    ]
    for t in y_ticks:
        y = frame.py(t)
        out.append(f'<text x="{_f(frame.left - 6)}" y="{_f(y + 4)}" text-anchor="end" font-size="10">{t:g}</text>')
    out.append(f'<text x="{_f((frame.left + frame.right) / 2)}" y="{_f(frame.height - 6)}" '
               f'text-anchor="middle" font-size="11">{escape(xlabel)}</text>')
    out.append(f'<text x="12" y="{_f((frame.top + frame.bottom) / 2)}" font-size="11" '
               f'transform="rotate(-90 12 {_f((frame.top + frame.bottom) / 2)})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    return out


def _legend(frame: _Frame, names: Sequence[str]) -> list[str]:
    out = []
    for i, name in enumerate(names):
        y = frame.top + 14 * i
        colour = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{_f(frame.right + 10)}" y="{_f(y)}" width="10" height="10" fill="{colour}"/>')
        out.append(f'<text x="{_f(frame.right + 24)}" y="{_f(y + 9)}" font-size="10">{escape(name)}</text>')
    return out


def line_chart(title: str, xs: Sequence[float], series: Mapping[str, Sequence[float]],
               xlabel: str = "", ylabel: str = "", y_range=(0.0, 1.0),
               x_labels: Sequence[str] | None = None) -> str:
    """One ``<polyline>`` per series, drawn in insertion order."""
    frame = _Frame((min(xs), max(xs)), y_range)
    out = _header(frame, title) + _axes(frame, xlabel, ylabel, _ticks(y_range))
    labels = x_labels if x_labels is not None else [f"{x:g}" for x in xs]
    for x, lab in zip(xs, labels):
        out.append(f'<text x="{_f(frame.px(x))}" y="{_f(frame.bottom + 14)}" text-anchor="middle" '
                   f'font-size="10">{escape(lab)}</text>')
    for i, (name, ys) in enumerate(series.items()):
        if len(ys) != len(xs):
            raise ValueError(f"series {name!r} has {len(ys)} points for {len(xs)} x values")
        pts = " ".join(f"{_f(frame.px(x))},{_f(frame.py(y))}" for x, y in zip(xs, ys))
        out.append(f'<polyline data-series={quoteattr(name)} points="{pts}" fill="none" '
                   f'stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="2"/>')
    out += _legend(frame, list(series))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(title: str, categories: Sequence[str], series: Mapping[str, Sequence[float]],
              ylabel: str = "", y_range=(0.0, 1.0)) -> str:
    """Grouped bars: one group per category, one bar per series."""
    frame = _Frame((0.0, float(len(categories))), y_range)
    out = _header(frame, title) + _axes(frame, "", ylabel, _ticks(y_range))
    k = max(len(series), 1)
    slot = (frame.px(1.0) - frame.px(0.0)) * 0.8 / k
    for c, cat in enumerate(categories):
        out.append(f'<text x="{_f(frame.px(c + 0.5))}" y="{_f(frame.bottom + 14)}" text-anchor="middle" '
                   f'font-size="10">{escape(cat)}</text>')
    for i, (name, ys) in enumerate(series.items()):
        if len(ys) != len(categories):
            raise ValueError(f"series {name!r} has {len(ys)} values for {len(categories)} categories")
        for c, y in enumerate(ys):
            x = frame.px(c + 0.1) + i * slot
            top = frame.py(min(max(y, frame.y0), frame.y1))
            out.append(f'<rect data-series={quoteattr(name)} x="{_f(x)}" y="{_f(top)}" width="{_f(slot)}" '
                       f'height="{_f(frame.bottom - top)}" fill="{PALETTE[i % len(PALETTE)]}"/>')
    out += _legend(frame, list(series))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _ticks(y_range, n: int = 5) -> list[float]:
    lo, hi = y_range
    return [round(lo + (hi - lo) * i / (n - 1), 6) for i in range(n)]
