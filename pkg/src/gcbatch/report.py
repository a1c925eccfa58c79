"""CSV tables and static SVG figures for evaluation and multigoal results."""
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .store import write_csv

EPISODE_COLUMNS = ["method", "seed", "episode", "goal_x", "goal_y", "init_heading",
                   "closest_distance", "reached", "steps"]
PALETTE = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"]


def write_episodes(path, summaries):
    rows = []
    for s in summaries:
        for r in s.episode_records:
            rows.append([s.method] + [r[k] for k in EPISODE_COLUMNS[1:]])
    write_csv(path, EPISODE_COLUMNS, rows)


def write_summary(path, summaries, env_kind=""):
    rows = [[env_kind, s.method, s.pooled_mean, s.pooled_std,
             sum(r["reached"] for r in s.episode_records) / len(s.episode_records),
             len(s.episode_records)] for s in summaries]
    write_csv(path, ["env", "method", "mean", "std", "reach_rate", "episodes"], rows)


def write_per_seed(path, summaries):
    rows = [[s.method, seed, mean, std] for s in summaries for seed, mean, std in s.per_seed]
    write_csv(path, ["method", "seed", "mean", "std"], rows)


def write_violin(path, summaries):
    """One closest-distance column per method, rows aligned by episode."""
    cols = [[r["closest_distance"] for r in s.episode_records] for s in summaries]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("methods were evaluated on different episode sets")
    write_csv(path, [s.method for s in summaries], zip(*cols))


def write_trace(path, trace):
    write_csv(path, ["step", "x", "y", "heading", "goal_x", "goal_y"], trace.rows)


def _fmt(v):
    return f"{v:.3f}".rstrip("0").rstrip(".") if v != 0 else "0"


def _svg(width, height, body, desc):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n<desc>{escape(desc)}</desc>\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n")


def distance_svg(summaries, title="closest distance", desc="", bins=30):
    """Mirrored-histogram (violin-like) plot of closest distance per method."""
    w, h, pad = 120 * max(1, len(summaries)) + 80, 360, 40
    allv = np.concatenate([[r["closest_distance"] for r in s.episode_records] for s in summaries])
    top = float(max(allv.max(), 1e-9)) * 1.05
    edges = np.linspace(0.0, top, bins + 1)

    def ypix(v):
        return h - pad - (h - 2 * pad) * v / top

    body = [f'<text x="{w / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" stroke="black"/>']
    for k in range(5):
        v = top * k / 4
        body.append(f'<text x="{pad - 4}" y="{ypix(v):.1f}" text-anchor="end" font-size="10">{_fmt(v)}</text>')
    for i, s in enumerate(summaries):
        vals = np.array([r["closest_distance"] for r in s.episode_records])
        counts, _ = np.histogram(vals, edges)
        cx = pad + 60 + 120 * i
        scale = 50.0 / max(1, counts.max())
        right = [(cx + c * scale, ypix(0.5 * (a + b))) for c, a, b in zip(counts, edges[:-1], edges[1:])]
        left = [(2 * cx - x, y) for x, y in reversed(right)]
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in right + left)
        col = PALETTE[i % len(PALETTE)]
        body.append(f'<polygon points="{pts}" fill="{col}" fill-opacity="0.5" stroke="{col}"/>')
        m = float(vals.mean())
        body.append(f'<line x1="{cx - 30}" y1="{ypix(m):.1f}" x2="{cx + 30}" y2="{ypix(m):.1f}" stroke="black"/>')
        body.append(f'<text x="{cx}" y="{h - pad + 16}" text-anchor="middle" font-size="11">{escape(s.method)}</text>')
    return _svg(w, h, body, desc)


def trace_svg(trace, title="multigoal", desc="", tick_every=10):
    """Path polyline, numbered goal markers and heading ticks."""
    xs = [trace.start[0]] + [r[1] for r in trace.rows] + [g[0] for g in trace.goals]
    ys = [trace.start[1]] + [r[2] for r in trace.rows] + [g[1] for g in trace.goals]
    lo_x, hi_x, lo_y, hi_y = min(xs) - 1, max(xs) + 1, min(ys) - 1, max(ys) + 1
    size, pad = 400, 30
    span = max(hi_x - lo_x, hi_y - lo_y)

    def px(x, y):
        return pad + (x - lo_x) / span * size, pad + size - (y - lo_y) / span * size

    w = h = size + 2 * pad
    body = [f'<text x="{w / 2}" y="18" text-anchor="middle" font-size="13">'
            f'{escape(title)} ({trace.achieved}/{len(trace.goals)} goals)</text>']
    pts = [px(*trace.start)] + [px(r[1], r[2]) for r in trace.rows]
    body.append('<polyline fill="none" stroke="#1b9e77" stroke-width="1.5" points="'
                + " ".join(f"{x:.1f},{y:.1f}" for x, y in pts) + '"/>')
    for k, r in enumerate(trace.rows):
        if k % tick_every == 0:
            x0, y0 = px(r[1], r[2])
            body.append(f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x0 + 8 * math.cos(r[3]):.1f}" '
                        f'y2="{y0 - 8 * math.sin(r[3]):.1f}" stroke="#555"/>')
    for i, g in enumerate(trace.goals):
        gx, gy = px(*g)
        col = "#d95f02" if i < trace.achieved else "#999"
        body.append(f'<circle cx="{gx:.1f}" cy="{gy:.1f}" r="5" fill="{col}"/>')
        body.append(f'<text x="{gx + 7:.1f}" y="{gy - 7:.1f}" font-size="11">{i + 1}</text>')
    sx, sy = px(*trace.start)
    body.append(f'<rect x="{sx - 4:.1f}" y="{sy - 4:.1f}" width="8" height="8" fill="black"/>')
    return _svg(w, h, body, desc)


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
