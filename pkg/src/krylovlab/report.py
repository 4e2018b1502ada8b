"""CSV and SVG emitters for experiment traces."""
from __future__ import annotations

import csv
import io
import math
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigError
from .operators import Rule

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def format_value(v):
    """CSV cell text: reals with 17 significant digits, complex as a+bi."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (complex, np.complexfloating)):
        return f"{v.real:.17g}{v.imag:+.17g}i"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return str(v)


def rows_to_csv(rows, columns=None):
    """RFC 4180 text with a mandatory header row."""
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def parse_cell(text):
    text = text.strip()
    if text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith("i"):
        try:
            return complex(text[:-1] + "j")
        except ValueError:
            pass
    return text


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path} is empty") from None
        rows = [dict(zip(header, (parse_cell(c) for c in rec))) for rec in reader if rec]
    return header, rows


def column_values(header, rows, expr):
    """Values of a column or an arithmetic expression over columns."""
    if expr in header:
        return np.array([_real(r[expr]) for r in rows], dtype=float)
    names = tuple(h for h in header if h.isidentifier())
    try:
        rule = Rule(expr, var=names)
    except ConfigError:
        raise ConfigError(f"unknown column {expr!r}; available: {', '.join(header)}") from None
    env = {h: np.array([_real(r[h]) for r in rows], dtype=float) for h in names}
    out = rule.evaluate(env)
    return np.broadcast_to(out, (len(rows),)).astype(float)


def _real(v):
    if isinstance(v, complex):
        return abs(v)
    if isinstance(v, str):
        return math.nan
    return v


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, count)


def svg_plot(x, series, xlabel="N", ylabel="", log=False, title="", width=640, height=400):
    """Self-contained SVG line chart; ``series`` maps labels to y arrays."""
    left, right, top, bottom = 70, 160, 30, 50
    pw, ph = width - left - right, height - top - bottom
    x = np.asarray(x, dtype=float)
    ys = {}
    for name, y in series.items():
        y = np.asarray(y, dtype=float)
        if log:
            with np.errstate(divide="ignore", invalid="ignore"):
                y = np.where(y > 0, np.log10(np.where(y > 0, y, 1.0)), np.nan)
        ys[name] = y
    finite_x = x[np.isfinite(x)]
    finite_y = np.concatenate([y[np.isfinite(y)] for y in ys.values()]) if ys else np.zeros(0)
    x0, x1 = (finite_x.min(), finite_x.max()) if finite_x.size else (0.0, 1.0)
    y0, y1 = (finite_y.min(), finite_y.max()) if finite_y.size else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="18" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{escape(title)}</text>')
    out.append(f'<line class="axis" x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" '
               'stroke="black"/>')
    out.append(f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" '
               'stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 5}" '
                   'stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{top + ph + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        label = f"1e{t:.3g}" if log else f"{t:.4g}"
        out.append(f'<line x1="{left - 5}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" '
                   'stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(t) + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{label}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    ylab = ("log10 " if log else "") + ylabel
    out.append(f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.2f})" font-family="sans-serif" '
               f'font-size="12">{escape(ylab)}</text>')
    for k, (name, y) in enumerate(ys.items()):
        color = PALETTE[k % len(PALETTE)]
        # break the line at non-finite values
        segment = []
        segments = []
        for xv, yv in zip(x, y):
            if np.isfinite(xv) and np.isfinite(yv):
                segment.append(f"{px(xv):.2f},{py(yv):.2f}")
            elif segment:
                segments.append(segment)
                segment = []
        if segment:
            segments.append(segment)
        for seg in segments:
            out.append(f'<polyline class="series" data-name="{escape(name)}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5" points="{" ".join(seg)}"/>')
        ly = top + 14 + 18 * k
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
