"""Self-contained SVG charts built from result records.

Three layouts are produced by :func:`emit_plots`:

* generation vs metric for a born-again sequence (accuracy, NLL, predictive
  uncertainty, confidence diversity), one SVG per metric;
* temperature vs metric, with a dashed reference line at the best value a
  born-again sequence reached over all its generations (largest for
  accuracy, uncertainty and diversity, smallest for NLL);
* per-scheme bars for accuracy and ECE with sample-standard-deviation
  error bars.

Lines show the mean over seeds; error bars are the sample standard
deviation across seeds and are omitted when only one seed is present.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 480, 320
MARGIN = dict(left=64, right=16, top=36, bottom=48)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")

METRICS = {
    "accuracy": ("Accuracy", max),
    "nll": ("NLL", min),
    "avg_pred_uncertainty": ("Average predictive uncertainty", max),
    "confidence_diversity": ("Confidence diversity", max),
    "ece": ("ECE", min),
}


def _mean_std(values):
    v = np.asarray(values, dtype=float)
    std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return float(v.mean()), std


def _grouped(records, key, metric):
    """``{key(r): [metric values]}`` in first-seen order."""
    out = {}
    for r in records:
        out.setdefault(key(r), []).append(getattr(r, metric))
    return out


def _range(values):
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if hi - lo < 1e-12:
        pad = max(abs(lo) * 0.05, 0.05)
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, title, xlabel, ylabel):
        self.parts = []
        self.x0, self.x1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.y0, self.y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
        self.text(WIDTH / 2, 20, title, size=14, anchor="middle")
        self.text((self.x0 + self.x1) / 2, HEIGHT - 10, xlabel, anchor="middle")
        self.parts.append(
            f'<text x="14" y="{(self.y0 + self.y1) / 2:.1f}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 14 {(self.y0 + self.y1) / 2:.1f})">{escape(ylabel)}</text>')
        self.parts.append(
            f'<rect x="{self.x0}" y="{self.y1}" width="{self.x1 - self.x0}" height="{self.y0 - self.y1}" '
            'fill="none" stroke="#333"/>')

    def text(self, x, y, s, size=12, anchor="start"):
        self.parts.append(f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" '
                          f'text-anchor="{anchor}">{escape(str(s))}</text>')

    def set_scale(self, xlim, ylim):
        self.xlim, self.ylim = xlim, ylim
        for i in range(5):
            v = ylim[0] + (ylim[1] - ylim[0]) * i / 4
            y = self.sy(v)
            self.parts.append(f'<line x1="{self.x0 - 4}" y1="{y:.1f}" x2="{self.x0}" y2="{y:.1f}" stroke="#333"/>')
            self.text(self.x0 - 6, y + 4, f"{v:.4g}", size=10, anchor="end")

    def sx(self, v):
        lo, hi = self.xlim
        return self.x0 + (v - lo) / (hi - lo) * (self.x1 - self.x0)

    def sy(self, v):
        lo, hi = self.ylim
        return self.y0 - (v - lo) / (hi - lo) * (self.y0 - self.y1)

    def xtick(self, v, label):
        x = self.sx(v)
        self.parts.append(f'<line x1="{x:.1f}" y1="{self.y0}" x2="{x:.1f}" y2="{self.y0 + 4}" stroke="#333"/>')
        self.text(x, self.y0 + 16, label, size=10, anchor="middle")

    def errbar(self, x, y, err, color):
        if err <= 0 or not math.isfinite(err):
            return
        px, lo, hi = self.sx(x), self.sy(y - err), self.sy(y + err)
        self.parts.append(f'<line x1="{px:.1f}" y1="{lo:.1f}" x2="{px:.1f}" y2="{hi:.1f}" stroke="{color}"/>')
        for yy in (lo, hi):
            self.parts.append(f'<line x1="{px - 3:.1f}" y1="{yy:.1f}" x2="{px + 3:.1f}" y2="{yy:.1f}" '
                              f'stroke="{color}"/>')

    def svg(self) -> str:
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}">\n<rect width="100%" height="100%" fill="white"/>\n'
                f"{body}\n</svg>\n")


def line_chart(series, title, xlabel, ylabel, hlines=()) -> str:
    """``series``: ``(label, xs, ys, errs)`` tuples; ``hlines``: ``(label, y)`` pairs."""
    xs_all = [x for _, xs, _, _ in series for x in xs]
    if not xs_all:
        raise ValueError("line_chart needs at least one point")
    ys_all = [y + s * e for _, _, ys, es in series for y, e in zip(ys, es) for s in (-1, 1)]
    ys_all += [y for _, y in hlines]
    c = _Canvas(title, xlabel, ylabel)
    c.set_scale(_range(xs_all), _range(ys_all))
    for x in sorted(set(xs_all)):
        c.xtick(x, f"{x:g}")
    for label, y in hlines:
        py = c.sy(y)
        c.parts.append(f'<line x1="{c.x0}" y1="{py:.1f}" x2="{c.x1}" y2="{py:.1f}" stroke="#555" '
                       'stroke-dasharray="6 4"/>')
        c.text(c.x1 - 4, py - 4, f"{label} ({y:.4g})", size=10, anchor="end")
    for i, (label, xs, ys, es) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{c.sx(x):.1f},{c.sy(y):.1f}" for x, y in zip(xs, ys) if math.isfinite(y))
        if len(xs) > 1:
            c.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y, e in zip(xs, ys, es):
            if math.isfinite(y):
                c.errbar(x, y, e, color)
                c.parts.append(f'<circle cx="{c.sx(x):.1f}" cy="{c.sy(y):.1f}" r="3" fill="{color}"/>')
        if label:
            c.text(c.x0 + 8, c.y1 + 14 * (i + 1), label, size=10)
    return c.svg()


def bar_chart(labels, means, stds, title, ylabel) -> str:
    if not labels:
        raise ValueError("bar_chart needs at least one bar")
    lows = [m - s for m, s in zip(means, stds)]
    highs = [m + s for m, s in zip(means, stds)]
    lo, hi = _range(lows + highs + [0.0])
    c = _Canvas(title, "scheme", ylabel)
    n = len(labels)
    c.set_scale((0.0, float(n)), (min(lo, 0.0), hi))
    width = 0.6
    base = c.sy(max(c.ylim[0], 0.0))
    for i, (name, m, s) in enumerate(zip(labels, means, stds)):
        color = COLORS[i % len(COLORS)]
        x_left, x_right = c.sx(i + 0.5 - width / 2), c.sx(i + 0.5 + width / 2)
        top = c.sy(m)
        y, h = min(top, base), abs(base - top)
        c.parts.append(f'<rect x="{x_left:.1f}" y="{y:.1f}" width="{x_right - x_left:.1f}" '
                       f'height="{h:.1f}" fill="{color}" fill-opacity="0.8"/>')
        c.errbar(i + 0.5, m, s, "#000")
        c.xtick(i + 0.5, name)
    return c.svg()


def generation_plots(records) -> dict:
    """Generation vs accuracy, NLL, uncertainty and diversity (mean over seeds)."""
    out = {}
    for metric in ("accuracy", "nll", "avg_pred_uncertainty", "confidence_diversity"):
        label, _ = METRICS[metric]
        groups = _grouped(records, lambda r: r.generation, metric)
        gens = sorted(groups)
        stats = [_mean_std(groups[g]) for g in gens]
        out[f"generation_{metric}.svg"] = line_chart(
            [("", gens, [m for m, _ in stats], [s for _, s in stats])],
            f"{label} over generations", "generation", label)
    return out


def reference_values(ban_records) -> dict:
    """Best value over generations of the seed-averaged sequence, per metric."""
    out = {}
    for metric in ("accuracy", "nll", "avg_pred_uncertainty", "confidence_diversity"):
        groups = _grouped(ban_records, lambda r: r.generation, metric)
        means = [float(np.mean(v)) for v in groups.values()]
        out[metric] = METRICS[metric][1](means)
    return out


def temperature_plots(records, ban_records=None) -> dict:
    """T vs metric; reference lines come from ``ban_records`` when given."""
    refs = reference_values(ban_records) if ban_records else {}
    out = {}
    for metric in ("accuracy", "nll", "avg_pred_uncertainty", "confidence_diversity"):
        label, best = METRICS[metric]
        groups = _grouped(records, lambda r: r.T, metric)
        Ts = sorted(groups)
        stats = [_mean_std(groups[t]) for t in Ts]
        hl = []
        if metric in refs:
            hl.append((("max" if best is max else "min") + " over generations", refs[metric]))
        out[f"temperature_{metric}.svg"] = line_chart(
            [("", Ts, [m for m, _ in stats], [s for _, s in stats])],
            f"{label} vs temperature", "T", label, hl)
    return out


def comparison_plots(records) -> dict:
    out = {}
    for metric in ("accuracy", "ece"):
        groups = _grouped(records, lambda r: r.scheme, metric)
        names = list(groups)
        stats = [_mean_std(groups[n]) for n in names]
        out[f"schemes_{metric}.svg"] = bar_chart(
            names, [m for m, _ in stats], [s for _, s in stats],
            f"{METRICS[metric][0]} by scheme", METRICS[metric][0])
    return out


def emit_plots(records, out_dir, ban_records=None) -> list:
    """Write the charts that fit ``records`` into ``out_dir``; return the paths.

    ``ban`` rows give the generation layout, ``temperature`` rows the
    temperature layout (reference lines from ``ban_records`` or, failing
    that, from ``ban`` rows in the same table). A table with neither gets
    per-scheme bars.
    """
    records = list(records)
    if not records:
        raise ValueError("cannot plot an empty results table")
    ban = [r for r in records if r.scheme == "ban"]
    temp = [r for r in records if r.scheme == "temperature"]
    charts = {}
    if ban:
        charts.update(generation_plots(ban))
    if temp:
        charts.update(temperature_plots(temp, list(ban_records or []) or ban))
    if not ban and not temp:
        charts.update(comparison_plots(records))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, svg in charts.items():
        p = out_dir / name
        p.write_text(svg)
        paths.append(p)
    return paths
