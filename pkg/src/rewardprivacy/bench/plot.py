"""Threshold-versus-return line charts written as plain SVG.

The markup is assembled by hand so the output depends only on the rows: no
fonts are measured, nothing is timestamped and numbers are printed at fixed
precision.
"""
from __future__ import annotations

from collections import OrderedDict
from pathlib import Path
from xml.sax.saxutils import escape

from .runner import ResultRow

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 190, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _get(row, key):
    return getattr(row, key) if isinstance(row, ResultRow) else row.get(key)


def _mean(values):
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def _series(rows):
    """Seed-averaged lines keyed by label; x is the threshold fraction."""
    by_x = OrderedDict()
    for row in rows:
        x = _get(row, "threshold_frac")
        if x is None or _get(row, "error"):
            continue
        by_x.setdefault(float(x), []).append(row)
    xs = sorted(by_x)
    observers = []
    for row in rows:
        if _get(row, "observer") not in observers:
            observers.append(_get(row, "observer"))
    lines = OrderedDict()
    lines["Reward Threshold"] = [(x, _mean([_get(r, "achieved_return") for r in by_x[x]])) for x in xs]
    for obs in observers:
        lines[f"IRL ({obs})"] = [(x, _mean([_get(r, "irl_rollout_return") for r in by_x[x]
                                           if _get(r, "observer") == obs])) for x in xs]
    e_star = _mean([_get(r, "e_star") for x in xs for r in by_x[x]])
    return xs, lines, e_star


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def svg_plot(rows, title: str) -> str:
    xs, lines, e_star = _series(rows)
    ys = [y for pts in lines.values() for _, y in pts if y is not None]
    if e_star is not None:
        ys.append(e_star)
    lo, hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + x * plot_w

    def sy(y):
        return TOP + (hi - y) / (hi - lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{LEFT + plot_w / 2:.2f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>',
    ]
    for i in range(6):
        fx = i / 5
        out.append(f'<line x1="{_fmt(sx(fx))}" y1="{TOP + plot_h}" x2="{_fmt(sx(fx))}" '
                   f'y2="{TOP + plot_h + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(fx))}" y="{TOP + plot_h + 18}" text-anchor="middle">{fx:.1f}</text>')
        fy = lo + (hi - lo) * i / 5
        out.append(f'<line x1="{LEFT - 5}" y1="{_fmt(sy(fy))}" x2="{LEFT}" y2="{_fmt(sy(fy))}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_fmt(sy(fy) + 4)}" text-anchor="end">{fy:.3g}</text>')
    out.append(f'<text x="{LEFT + plot_w / 2:.2f}" y="{HEIGHT - 20}" text-anchor="middle">'
               'Reward threshold (fraction of feasible range)</text>')
    out.append(f'<text x="18" y="{TOP + plot_h / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + plot_h / 2:.2f})">Expected reward</text>')

    legend = []
    if e_star is not None:
        out.append(f'<line x1="{LEFT}" y1="{_fmt(sy(e_star))}" x2="{LEFT + plot_w}" y2="{_fmt(sy(e_star))}" '
                   'stroke="gray" stroke-dasharray="6 4"/>')
        legend.append(("E* (optimal)", "gray", "6 4"))
    for k, (label, pts) in enumerate(lines.items()):
        colour = PALETTE[k % len(PALETTE)]
        pts = [(x, y) for x, y in pts if y is not None]
        if pts:
            coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="2"/>')
            for x, y in pts:
                out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{colour}"/>')
        legend.append((label, colour, None))
    for k, (label, colour, dash) in enumerate(legend):
        y = TOP + 10 + 20 * k
        x = WIDTH - RIGHT + 15
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 24}" y2="{y}" stroke="{colour}" stroke-width="2"{dash_attr}/>')
        out.append(f'<text x="{x + 30}" y="{y + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def group_rows(rows, group_keys=("env_name", "planner", "antireward_kind")):
    groups = OrderedDict()
    for row in rows:
        key = tuple(_get(row, k) for k in group_keys)
        groups.setdefault(key, []).append(row)
    return groups


def render_plot(rows, group_keys=("env_name", "planner", "antireward_kind"), out_dir=".") -> list[Path]:
    """One SVG per group of rows; returns the written paths in group order."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for key, members in group_rows(rows, group_keys).items():
        parts = [str(k) for k in key if k is not None]
        path = out_dir / ("_".join(parts) + ".svg")
        title = " / ".join(parts)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg_plot(members, title))
        paths.append(path)
    return paths
