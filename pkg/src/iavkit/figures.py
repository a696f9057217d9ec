"""Dependency-free SVG renderers for the report figures.

Figures are plain-text SVG built from primitives only, so outputs are
diffable in tests and every plotted number also lives in a sibling CSV.
The renderers draw: a per-head score heatmap, per-head box-and-whisker
plots, accuracy curves, and a 2-D scatter colored by class.
"""

from __future__ import annotations

import numpy as np

_PALETTE = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
]
# Low -> mid -> high ramp (dark violet, teal, yellow).
_RAMP = [(68, 1, 84), (33, 145, 140), (253, 231, 37)]


def _doc(width: int, height: int, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def value_color(value: float, vmin: float, vmax: float) -> str:
    """Map a value to a hex color on the package ramp."""
    if vmax <= vmin:
        t = 0.5
    else:
        t = (value - vmin) / (vmax - vmin)
    t = min(1.0, max(0.0, t))
    if t < 0.5:
        a, b, local = _RAMP[0], _RAMP[1], t * 2
    else:
        a, b, local = _RAMP[1], _RAMP[2], (t - 0.5) * 2
    rgb = [round(ca + (cb - ca) * local) for ca, cb in zip(a, b)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def heatmap_svg(
    values,
    title: str = "",
    sort_rows_desc: bool = False,
    cell: int = 36,
) -> str:
    """Grid heatmap of an [L, H] matrix, rows = layers, columns = heads.

    With sort_rows_desc the heads within each layer are reordered by
    decreasing value; this is a presentation view only (head identity is
    not in the figure), so the sibling CSV keeps canonical order.
    """
    vals = np.asarray(values, dtype=np.float64)
    if sort_rows_desc:
        vals = -np.sort(-vals, axis=1)
    n_rows, n_cols = vals.shape
    vmin, vmax = float(vals.min()), float(vals.max())
    left, top = 70, 40
    width = left + n_cols * cell + 20
    height = top + n_rows * cell + 30
    body = [f'<text x="{left}" y="22" font-size="14">{title}</text>'] if title else []
    for r in range(n_rows):
        body.append(
            f'<text x="{left - 8}" y="{top + r * cell + cell / 2 + 4:.0f}" '
            f'font-size="11" text-anchor="end">L{r}</text>'
        )
        for c in range(n_cols):
            color = value_color(float(vals[r, c]), vmin, vmax)
            x, y = left + c * cell, top + r * cell
            body.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{color}" stroke="#ffffff"/>'
            )
            body.append(
                f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" font-size="9" '
                f'text-anchor="middle" fill="#ffffff">{vals[r, c]:.2f}</text>'
            )
    for c in range(n_cols):
        body.append(
            f'<text x="{left + c * cell + cell / 2:.0f}" y="{top + n_rows * cell + 16}" '
            f'font-size="11" text-anchor="middle">H{c}</text>'
        )
    return _doc(width, height, body)


def boxplot_svg(
    boxes: list[dict],
    title: str = "",
    y_min: float | None = None,
    y_max: float | None = None,
) -> str:
    """Box-and-whisker chart; each box is a dict with
    label, q1, median, q3, min, max."""
    if not boxes:
        raise ValueError("no boxes to draw")
    lo = y_min if y_min is not None else min(b["min"] for b in boxes)
    hi = y_max if y_max is not None else max(b["max"] for b in boxes)
    if hi <= lo:
        hi = lo + 1.0
    left, top, plot_h, slot = 50, 40, 220, 34
    width = left + len(boxes) * slot + 20
    height = top + plot_h + 40

    def y_of(v: float) -> float:
        return top + plot_h * (1.0 - (v - lo) / (hi - lo))

    body = [f'<text x="{left}" y="22" font-size="14">{title}</text>'] if title else []
    body.append(
        f'<line x1="{left - 6}" y1="{y_of(lo)}" x2="{left - 6}" y2="{y_of(hi)}" stroke="#333"/>'
    )
    for tick in (lo, (lo + hi) / 2, hi):
        body.append(
            f'<text x="{left - 10}" y="{y_of(tick) + 4:.2f}" font-size="10" '
            f'text-anchor="end">{tick:.2f}</text>'
        )
    for i, b in enumerate(boxes):
        cx = left + i * slot + slot / 2
        half = slot * 0.32
        body.append(
            f'<line x1="{_fmt(cx)}" y1="{_fmt(y_of(b["min"]))}" '
            f'x2="{_fmt(cx)}" y2="{_fmt(y_of(b["max"]))}" stroke="#333"/>'
        )
        for whisker in ("min", "max"):
            body.append(
                f'<line x1="{_fmt(cx - half / 2)}" y1="{_fmt(y_of(b[whisker]))}" '
                f'x2="{_fmt(cx + half / 2)}" y2="{_fmt(y_of(b[whisker]))}" stroke="#333"/>'
            )
        body.append(
            f'<rect x="{_fmt(cx - half)}" y="{_fmt(y_of(b["q3"]))}" width="{_fmt(2 * half)}" '
            f'height="{_fmt(max(0.0, y_of(b["q1"]) - y_of(b["q3"])))}" '
            f'fill="#76b7b2" stroke="#333"/>'
        )
        body.append(
            f'<line x1="{_fmt(cx - half)}" y1="{_fmt(y_of(b["median"]))}" '
            f'x2="{_fmt(cx + half)}" y2="{_fmt(y_of(b["median"]))}" '
            f'stroke="#000" stroke-width="2"/>'
        )
        body.append(
            f'<text x="{_fmt(cx)}" y="{top + plot_h + 16}" font-size="10" '
            f'text-anchor="middle">{b["label"]}</text>'
        )
    return _doc(width, height, body)


def line_chart_svg(
    series: list[tuple[str, list[float], list[float]]],
    title: str = "",
    y_min: float = 0.0,
    y_max: float = 1.0,
) -> str:
    """One polyline per (label, xs, ys) series, shared axes, legend at right."""
    if not series:
        raise ValueError("no series to draw")
    xs_all = [x for _, xs, _ in series for x in xs]
    x_lo, x_hi = min(xs_all), max(xs_all)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    left, top, plot_w, plot_h = 50, 40, 360, 220
    width = left + plot_w + 150
    height = top + plot_h + 40

    def pt(x: float, y: float) -> str:
        px = left + plot_w * (x - x_lo) / (x_hi - x_lo)
        py = top + plot_h * (1.0 - (y - y_min) / (y_max - y_min))
        return f"{px:.2f},{py:.2f}"

    body = [f'<text x="{left}" y="22" font-size="14">{title}</text>'] if title else []
    body.append(
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#999"/>'
    )
    for tick in (y_min, (y_min + y_max) / 2, y_max):
        py = top + plot_h * (1.0 - (tick - y_min) / (y_max - y_min))
        body.append(
            f'<text x="{left - 6}" y="{py + 4:.2f}" font-size="10" '
            f'text-anchor="end">{tick:.2f}</text>'
        )
    for tick in (x_lo, (x_lo + x_hi) / 2, x_hi):
        px = left + plot_w * (tick - x_lo) / (x_hi - x_lo)
        body.append(
            f'<text x="{px:.2f}" y="{top + plot_h + 16}" font-size="10" '
            f'text-anchor="middle">{tick:.3g}</text>'
        )
    for i, (label, xs, ys) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(pt(float(x), float(y)) for x, y in zip(xs, ys))
        body.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        ly = top + 14 * i
        body.append(
            f'<rect x="{left + plot_w + 12}" y="{ly}" width="10" height="10" fill="{color}"/>'
        )
        body.append(
            f'<text x="{left + plot_w + 26}" y="{ly + 9}" font-size="10">{label}</text>'
        )
    return _doc(width, height, body)


def scatter_svg(points, labels, title: str = "", size: int = 340) -> str:
    """2-D scatter of [N, 2] points, colored by integer label."""
    pts = np.asarray(points, dtype=np.float64)
    lab = np.asarray(labels)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] != lab.shape[0]:
        raise ValueError(f"need [N, 2] points and [N] labels, got {pts.shape}, {lab.shape}")
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    span[span == 0] = 1.0
    left, top = 40, 40
    width = left + size + 110
    height = top + size + 30

    body = [f'<text x="{left}" y="22" font-size="14">{title}</text>'] if title else []
    body.append(
        f'<rect x="{left}" y="{top}" width="{size}" height="{size}" fill="none" stroke="#999"/>'
    )
    for p, cls in zip(pts, lab):
        px = left + (p[0] - lo[0]) / span[0] * (size - 10) + 5
        py = top + (1.0 - (p[1] - lo[1]) / span[1]) * (size - 10) + 5
        color = _PALETTE[int(cls) % len(_PALETTE)]
        body.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" fill="{color}"/>')
    for i, cls in enumerate(sorted({int(c) for c in lab})):
        color = _PALETTE[cls % len(_PALETTE)]
        ly = top + 14 * i
        body.append(f'<rect x="{left + size + 12}" y="{ly}" width="10" height="10" fill="{color}"/>')
        body.append(f'<text x="{left + size + 26}" y="{ly + 9}" font-size="10">class {cls}</text>')
    return _doc(width, height, body)
