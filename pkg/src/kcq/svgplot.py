"""Minimal static SVG line plots built from the CLI's CSV outputs."""
from __future__ import annotations

import csv
import io
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=30, bottom=50)


def read_csv_columns(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        return {}
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


def _ticks(lo, hi, count=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


class _Frame:
    def __init__(self, xlo, xhi, ylo, yhi):
        if xhi == xlo:
            xhi = xlo + 1.0
        if yhi == ylo:
            pad = abs(ylo) * 0.05 or 1.0
            ylo, yhi = ylo - pad, yhi + pad
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi
        self.w = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def x(self, v):
        return MARGIN["left"] + (v - self.xlo) / (self.xhi - self.xlo) * self.w

    def y(self, v):
        return MARGIN["top"] + (self.yhi - v) / (self.yhi - self.ylo) * self.h

    def path(self, xs, ys):
        return " ".join(f"{'M' if i == 0 else 'L'}{self.x(a):.2f},{self.y(b):.2f}"
                        for i, (a, b) in enumerate(zip(xs, ys)))


def _axes(frame, title, xlabel, ylabel):
    out = [
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{frame.w}" height="{frame.h}" '
        'fill="none" stroke="#333"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for t in _ticks(frame.xlo, frame.xhi):
        out.append(f'<text x="{frame.x(t):.2f}" y="{HEIGHT - MARGIN["bottom"] + 16}" '
                   f'text-anchor="middle" font-size="10">{t:.4g}</text>')
    for t in _ticks(frame.ylo, frame.yhi):
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{frame.y(t) + 3:.2f}" '
                   f'text-anchor="end" font-size="10">{t:.4g}</text>')
    return out


def _legend(items):
    out = []
    for i, (label, color, dash) in enumerate(items):
        y = MARGIN["top"] + 14 + 16 * i
        x = WIDTH - MARGIN["right"] - 170
        d = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 24}" y2="{y}" stroke="{color}" stroke-width="2"{d}/>')
        out.append(f'<text x="{x + 30}" y="{y + 4}" font-size="11">{escape(label)}</text>')
    return out


def _svg(body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">\n' + "\n".join(body) + "\n</svg>\n")


def band_plot(timeseries_csv, title="mean +- 3 sd"):
    """Conditional and non-conditional mean +- 3 sd bands against time."""
    c = read_csv_columns(timeseries_csv)
    t = c["time"]
    lo_k = [m - 3 * s for m, s in zip(c["kcq_mean"], c["kcq_sd"])]
    hi_k = [m + 3 * s for m, s in zip(c["kcq_mean"], c["kcq_sd"])]
    lo_n = [m - 3 * s for m, s in zip(c["nmc_mean"], c["nmc_sd"])]
    hi_n = [m + 3 * s for m, s in zip(c["nmc_mean"], c["nmc_sd"])]
    fr = _Frame(min(t), max(t), min(lo_k + lo_n), max(hi_k + hi_n))
    body = _axes(fr, title, "time (s)", "response")
    for lo, hi, color in ((lo_n, hi_n, "#9ecae1"), (lo_k, hi_k, "#fdae6b")):
        pts = fr.path(t + t[::-1], hi + lo[::-1])
        body.append(f'<path d="{pts} Z" fill="{color}" fill-opacity="0.5" stroke="none"/>')
    body.append(f'<path d="{fr.path(t, c["nmc_mean"])}" fill="none" stroke="#3182bd" stroke-width="1.5"/>')
    body.append(f'<path d="{fr.path(t, c["kcq_mean"])}" fill="none" stroke="#e6550d" stroke-width="1.5"/>')
    body += _legend([("non-conditional mean, 3 sd band", "#3182bd", ""),
                     ("conditional mean, 3 sd band", "#e6550d", "")])
    return _svg(body)


def pdf_plot(pdf_csv, title="density"):
    """Conditional and non-conditional densities on the shared grid."""
    c = read_csv_columns(pdf_csv)
    g = c["grid"]
    fr = _Frame(min(g), max(g), 0.0, max(c["density"] + c["nonconditional_density"]))
    body = _axes(fr, title, "response", "density")
    body.append(f'<path d="{fr.path(g, c["nonconditional_density"])}" fill="none" '
                'stroke="#3182bd" stroke-width="1.5" stroke-dasharray="5,3"/>')
    body.append(f'<path d="{fr.path(g, c["density"])}" fill="none" stroke="#e6550d" stroke-width="1.5"/>')
    body += _legend([("conditional", "#e6550d", ""), ("non-conditional", "#3182bd", "5,3")])
    return _svg(body)
