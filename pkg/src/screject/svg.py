"""Minimal SVG line charts: axes, tick labels, polylines and a legend.

The output is plain text with fixed numeric formatting, so two calls with
the same series produce identical files.  A ``generated`` timestamp comment
is stamped unless ``deterministic`` is set.
"""

import datetime
import math
from xml.sax.saxutils import escape

__all__ = ["line_chart", "write_line_chart"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 30, 55


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step - 1e-9) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def _log_ticks(lo, hi):
    return [10.0 ** e for e in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)
            if lo * (1 - 1e-9) <= 10.0 ** e <= hi * (1 + 1e-9)]


def _fmt(v):
    return f"{v:.2f}"


def _label(v):
    return f"{v:g}"


def line_chart(series, title="", xlabel="", ylabel="", log_x=False, deterministic=False):
    """Render ``series`` (a list of ``(label, xs, ys)``) as an SVG document string.

    With ``log_x`` non-positive x values are dropped.
    """
    cleaned = []
    for label, xs, ys in series:
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if math.isfinite(x) and math.isfinite(y) and (not log_x or x > 0)]
        cleaned.append((str(label), pts))
    all_pts = [p for _, pts in cleaned for p in pts]
    if all_pts:
        x_lo, x_hi = min(p[0] for p in all_pts), max(p[0] for p in all_pts)
        y_lo, y_hi = min(p[1] for p in all_pts), max(p[1] for p in all_pts)
    else:
        x_lo, x_hi, y_lo, y_hi = (1.0, 10.0, 0.0, 1.0) if log_x else (0.0, 1.0, 0.0, 1.0)
    if x_hi == x_lo:
        x_lo, x_hi = (x_lo / 2, x_lo * 2) if log_x else (x_lo - 0.5, x_hi + 0.5)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    if log_x:
        lx_lo, lx_hi = math.log10(x_lo), math.log10(x_hi)

        def sx(x):
            return MARGIN_L + (math.log10(x) - lx_lo) / (lx_hi - lx_lo) * plot_w
    else:
        def sx(x):
            return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return MARGIN_T + (1 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
    ]
    if not deterministic:
        stamp = datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0).isoformat()
        out.append(f"<!-- generated {stamp} -->")
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    x0, x1 = MARGIN_L, MARGIN_L + plot_w
    y0, y1 = MARGIN_T + plot_h, MARGIN_T
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for t in (_log_ticks(x_lo, x_hi) if log_x else _ticks(x_lo, x_hi)):
        px = sx(t)
        out.append(f'<line x1="{_fmt(px)}" y1="{y0}" x2="{_fmt(px)}" y2="{y0 + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{y0 + 16}" text-anchor="middle">{_label(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        py = sy(t)
        out.append(f'<line x1="{x0 - 4}" y1="{_fmt(py)}" x2="{x0}" y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<text x="{x0 - 7}" y="{_fmt(py + 4)}" text-anchor="end">{_label(t)}</text>')
    if xlabel:
        out.append(f'<text x="{MARGIN_L + plot_w / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        cy = MARGIN_T + plot_h / 2
        out.append(f'<text x="16" y="{cy:.1f}" text-anchor="middle" transform="rotate(-90 16 {cy:.1f})">'
                   f"{escape(ylabel)}</text>")

    for i, (label, pts) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = MARGIN_T + 10 + 16 * i
        lx = x1 + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 24}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_chart(path, series, **kwargs):
    text = line_chart(series, **kwargs)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path
