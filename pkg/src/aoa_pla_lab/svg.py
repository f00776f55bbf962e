"""Tiny SVG line plots: analytic curves as lines, empirical points with whiskers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Series:
    label: str
    x: list[float]
    y: list[float]
    points_y: list[float] | None = None
    ci_low: list[float] | None = None
    ci_high: list[float] | None = None


@dataclass
class Plot:
    title: str
    x_label: str
    y_label: str
    log_x: bool = False
    series: list[Series] = field(default_factory=list)
    y_range: tuple[float, float] = (0.0, 1.0)
    width: int = 720
    height: int = 460


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def render(plot: Plot) -> str:
    left, right, top, bottom = 70, 190, 40, 55
    w = plot.width - left - right
    h = plot.height - top - bottom
    xs = [x for s in plot.series for x in s.x]
    if plot.log_x:
        xs = [x for x in xs if x > 0]
    fx = (lambda v: math.log10(v)) if plot.log_x else (lambda v: v)
    x_lo, x_hi = (fx(min(xs)), fx(max(xs))) if xs else (0.0, 1.0)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    y_lo, y_hi = plot.y_range

    def px(v):
        return left + (fx(v) - x_lo) / (x_hi - x_lo) * w

    def py(v):
        v = min(max(v, y_lo), y_hi)
        return top + (1 - (v - y_lo) / (y_hi - y_lo)) * h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{plot.width}" height="{plot.height}" '
        f'font-family="sans-serif" font-size="12">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{left + w / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(plot.title)}</text>',
        f'<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>',
    ]
    if plot.log_x:
        x_ticks = [10**e for e in range(math.floor(x_lo), math.ceil(x_hi) + 1) if x_lo - 1e-9 <= e <= x_hi + 1e-9]
    else:
        x_ticks = _nice_ticks(x_lo, x_hi)
    for t in x_ticks:
        x = px(t)
        out.append(f'<line x1="{x:.1f}" y1="{top}" x2="{x:.1f}" y2="{top + h}" stroke="#ddd"/>')
        out.append(f'<text x="{x:.1f}" y="{top + h + 16}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y_lo, y_hi, 5):
        y = py(t)
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + w}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{t:g}</text>')
    out.append(
        f'<text x="{left + w / 2:.1f}" y="{plot.height - 14}" text-anchor="middle">{escape(plot.x_label)}</text>'
    )
    out.append(
        f'<text transform="translate(18,{top + h / 2:.1f}) rotate(-90)" text-anchor="middle">'
        f"{escape(plot.y_label)}</text>"
    )

    for i, s in enumerate(plot.series):
        color = PALETTE[i % len(PALETTE)]
        pts = [(px(x), py(y)) for x, y in zip(s.x, s.y) if not (plot.log_x and x <= 0)]
        if pts:
            path = " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if s.points_y is not None:
            for j, (x, y) in enumerate(zip(s.x, s.points_y)):
                if y is None or (plot.log_x and x <= 0):
                    continue
                cx = px(x)
                if s.ci_low is not None and s.ci_high is not None:
                    y0, y1 = py(s.ci_low[j]), py(s.ci_high[j])
                    out.append(f'<line x1="{cx:.1f}" y1="{y0:.1f}" x2="{cx:.1f}" y2="{y1:.1f}" stroke="{color}"/>')
                    for yy in (y0, y1):
                        out.append(
                            f'<line x1="{cx - 3:.1f}" y1="{yy:.1f}" x2="{cx + 3:.1f}" y2="{yy:.1f}" stroke="{color}"/>'
                        )
                out.append(f'<circle cx="{cx:.1f}" cy="{py(y):.1f}" r="2.5" fill="{color}"/>')
        ly = top + 14 + 18 * i
        lx = left + w + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_rows(rows, title: str, x_label: str, log_x: bool, metric: str = "p_sd") -> str:
    """One series per sweep label; ``metric`` is ``p_sd`` or ``p_fa``."""
    plot = Plot(title, x_label, metric.upper().replace("_", " "), log_x)
    if metric == "p_fa":
        top = max(
            [getattr(r, metric) for r in rows] + [r.empirical["p_fa_ci_high"] for r in rows if r.empirical]
        )
        plot.y_range = (0.0, 1.25 * top if top > 0 else 1.0)
    by_label: dict[str, list] = {}
    for row in rows:
        by_label.setdefault(row.series, []).append(row)
    for label, group in by_label.items():
        s = Series(label or metric, [r.value for r in group], [getattr(r, metric) for r in group])
        if all(r.empirical for r in group):
            s.points_y = [r.empirical[f"{metric}_hat"] for r in group]
            s.ci_low = [r.empirical[f"{metric}_ci_low"] for r in group]
            s.ci_high = [r.empirical[f"{metric}_ci_high"] for r in group]
        plot.series.append(s)
    return render(plot)
