"""Minimal deterministic SVG line charts with error bars.

Two CSV schemas are understood: the gap curve (x = ``n``) and the
ambiguity sweep (x = ``gamma``). Every ``<metric>_mean`` column becomes a
series with error bars from the matching ``<metric>_std`` column. The
SVG text depends only on the CSV content.
"""

import math

from .csvio import read_csv
from .errors import ContractError
from .experiments import GAP_COLUMNS, SWEEP_COLUMNS

SCHEMAS = {"gap-curve": GAP_COLUMNS, "ambiguity-sweep": SWEEP_COLUMNS}

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def detect_schema(columns):
    for name, expected in SCHEMAS.items():
        if list(columns) == list(expected):
            return name
    listing = "; ".join(f"{name}: {','.join(cols)}" for name, cols in SCHEMAS.items())
    raise ContractError(f"unrecognized CSV columns {','.join(columns)}; expected one of: {listing}")


def _num(s):
    return format(s, ".6g")


def _nice_ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    return ticks


def render_svg(columns, rows, title=""):
    """SVG text for the parsed CSV. ``rows`` hold strings as read."""
    schema = detect_schema(columns)
    xcol = columns[0]
    metrics = [c[:-5] for c in columns if c.endswith("_mean")]
    data = [[float(v) for v in r] for r in rows]
    xs = [r[0] for r in data]
    series = {}
    for m in metrics:
        mi, si = columns.index(f"{m}_mean"), columns.index(f"{m}_std")
        series[m] = [(r[0], r[mi], r[si]) for r in data]

    finite = [v for pts in series.values() for x, y, s in pts
              for v in (y - (s if math.isfinite(s) else 0), y + (s if math.isfinite(s) else 0))
              if math.isfinite(v)]
    ylo, yhi = (min(finite + [0.0]), max(finite + [1.0])) if finite else (0.0, 1.0)
    xlo, xhi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    yticks = _nice_ticks(ylo, yhi)
    ylo, yhi = min(ylo, yticks[0]), max(yhi, yticks[-1])
    xticks = _nice_ticks(xlo, xhi)
    xticks = [t for t in xticks if xlo - 1e-12 <= t <= xhi + 1e-12] or [xlo, xhi]

    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return TOP + ph - (y - ylo) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<title>{title or schema}</title>',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for t in xticks:
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{TOP + ph + 18}" text-anchor="middle">{_num(t)}</text>')
    for t in yticks:
        y = py(t)
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end">{_num(t)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">{xcol}</text>')
    out.append(f'<text x="18" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ph / 2:.2f})">value (mean ± std)</text>')

    for i, (m, pts) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        good = [(x, y, s) for x, y, s in pts if math.isfinite(y)]
        for (x0, y0, _), (x1, y1, _) in zip(good, good[1:]):
            out.append(f'<line x1="{px(x0):.2f}" y1="{py(y0):.2f}" x2="{px(x1):.2f}" y2="{py(y1):.2f}" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        for x, y, s in good:
            cx, cy = px(x), py(y)
            if math.isfinite(s) and s > 0:
                lo_y, hi_y = py(y - s), py(y + s)
                out.append(f'<line x1="{cx:.2f}" y1="{lo_y:.2f}" x2="{cx:.2f}" y2="{hi_y:.2f}" stroke="{color}"/>')
                for yy in (lo_y, hi_y):
                    out.append(f'<line x1="{cx - 3:.2f}" y1="{yy:.2f}" x2="{cx + 3:.2f}" y2="{yy:.2f}" '
                               f'stroke="{color}"/>')
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2.5" fill="{color}"/>')
        ly = TOP + 10 + 18 * i
        lx = LEFT + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{m}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(csv_path, out_path):
    _, columns, rows = read_csv(csv_path)
    svg = render_svg(columns, rows)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return svg
