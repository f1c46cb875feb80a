"""svg module: self-contained line plots with a fixed 960x480 viewbox"""

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH = 960
HEIGHT = 480
MARGIN_LEFT = 80
MARGIN_RIGHT = 160
MARGIN_TOP = 40
MARGIN_BOTTOM = 50
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


class LinePlot:
    """
    Line plot accumulating series and horizontal rules, rendered to an svg string.

    With `log_y` the values are mapped through log10 before scaling, so only
    positive values are drawn; non positive and non finite points split a
    series into several polylines.
    """

    def __init__(self, title, x_label="t", y_label="", log_y=False):
        self.title = title
        self.x_label = x_label
        self.y_label = y_label
        self.log_y = log_y
        self.series = []
        self.rules = []

    def add_series(self, label, x, y, color=None, dashed=False):
        color = color or COLORS[len(self.series) % len(COLORS)]
        self.series.append((label, np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64), color, dashed))
        return self

    def hline(self, label, y, color="#555555"):
        self.rules.append((label, float(y), color))
        return self

    def _transform(self, y):
        if not self.log_y:
            return y
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(y > 0.0, np.log10(np.where(y > 0.0, y, 1.0)), np.nan)

    def _ranges(self):
        xs = [x for _, x, _, _, _ in self.series if x.size]
        ys = [self._transform(y) for _, _, y, _, _ in self.series if y.size]
        ys += [self._transform(np.array([y])) for _, y, _ in self.rules]
        x_all = np.concatenate(xs) if xs else np.array([0.0, 1.0])
        y_all = np.concatenate(ys) if ys else np.array([0.0, 1.0])
        x_all = x_all[np.isfinite(x_all)]
        y_all = y_all[np.isfinite(y_all)]
        x_lo, x_hi = (float(x_all.min()), float(x_all.max())) if x_all.size else (0.0, 1.0)
        y_lo, y_hi = (float(y_all.min()), float(y_all.max())) if y_all.size else (0.0, 1.0)
        if x_hi == x_lo:
            x_hi = x_lo + 1.0
        if y_hi == y_lo:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
        pad = 0.05 * (y_hi - y_lo)
        return x_lo, x_hi, y_lo - pad, y_hi + pad

    def render(self):
        x_lo, x_hi, y_lo, y_hi = self._ranges()
        plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
        plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

        def px(x):
            return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

        def py(y):
            return MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h

        svg = f"""<?xml version="1.0" standalone="no"?>
<svg version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" xmlns="http://www.w3.org/2000/svg">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>
<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-family="monospace" font-size="14">{escape(self.title)}</text>
<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#000000"/>
"""
        svg += self._axis_labels(x_lo, x_hi, y_lo, y_hi, px, py)
        legend_y = MARGIN_TOP + 10
        for label, x, y, color, dashed in self.series:
            dash = ' stroke-dasharray="6,4"' if dashed else ""
            for chunk in _finite_chunks(x, self._transform(y)):
                points = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in chunk)
                svg += f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1"{dash}/>\n'
            svg += _legend_entry(legend_y, label, color)
            legend_y += 18
        for label, y, color in self.rules:
            ty = self._transform(np.array([y]))[0]
            if not math.isfinite(ty):
                continue
            svg += (
                f'<line x1="{MARGIN_LEFT}" y1="{py(ty):.2f}" x2="{MARGIN_LEFT + plot_w}" y2="{py(ty):.2f}" '
                f'stroke="{color}" stroke-dasharray="2,3"/>\n'
            )
            svg += _legend_entry(legend_y, label, color)
            legend_y += 18
        return f"{svg}</svg>\n"

    def _axis_labels(self, x_lo, x_hi, y_lo, y_hi, px, py):
        out = ""
        for v in _ticks(x_lo, x_hi):
            out += _text(px(v), HEIGHT - MARGIN_BOTTOM + 16, f"{v:.4g}", "middle")
        for v in _ticks(y_lo, y_hi):
            label = f"1e{v:.1f}" if self.log_y else f"{v:.4g}"
            out += _text(MARGIN_LEFT - 6, py(v) + 3, label, "end")
        out += _text(MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2, HEIGHT - 12, self.x_label, "middle")
        if self.y_label:
            out += _text(12, MARGIN_TOP - 10, self.y_label, "start")
        return out


def _ticks(lo, hi, count=5):
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def _text(x, y, text, anchor):
    return (
        f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="{anchor}" font-family="monospace" '
        f'font-size="10">{escape(text)}</text>\n'
    )


def _finite_chunks(x, y):
    chunk = []
    for a, b in zip(x, y):
        if math.isfinite(a) and math.isfinite(b):
            chunk.append((a, b))
        elif chunk:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def _legend_entry(y, label, color):
    x = WIDTH - MARGIN_RIGHT + 10
    return (
        f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>\n'
        f'<text x="{x + 26}" y="{y + 4}" font-family="monospace" font-size="11">{escape(label)}</text>\n'
    )

