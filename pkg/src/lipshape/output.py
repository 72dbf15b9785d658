"""CSV, config, and SVG output helpers for the experiment runner.

Floats are written with Python's shortest round-trip representation (at most
17 significant digits, '.' decimal separator); CSVs carry a header row and
are bit-identical across runs for a fixed configuration.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .circle import RadialFunction


def format_value(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(x) for x in row])


def write_p1_csv(path, fn) -> None:
    """Serialize a P1 function (or radial function) as theta,value rows."""
    write_csv(path, ("theta", "value"), zip(fn.grid.nodes, fn.values))


def write_measure_csv(path, measure) -> None:
    write_csv(path, ("theta", "weight"), zip(measure.angles, measure.weights))


def read_config(path) -> dict[str, str]:
    """Flat key=value configuration file; blank lines and '#' comments ignored."""
    out: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _svg_document(width, height, body) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:g} {height:g}" '
        f'width="{width:g}" height="{height:g}">\n{body}\n</svg>\n'
    )


def domain_svg(path, f: RadialFunction, size: float = 400.0) -> None:
    """Closed boundary polyline of the star-shaped domain, auto-fit viewBox."""
    th = f.grid.nodes
    x = f.values * np.cos(th)
    y = f.values * np.sin(th)
    r = 1.05 * float(np.hypot(x, y).max())
    scale = size / (2.0 * r)
    px = (x + r) * scale
    py = (r - y) * scale
    points = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(px, py))
    body = (
        f'<polygon points="{points}" fill="#c8d8f0" stroke="#1f3a6e" stroke-width="1.5"/>'
        f'\n<circle cx="{size / 2:.1f}" cy="{size / 2:.1f}" r="2" fill="#1f3a6e"/>'
    )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(_svg_document(size, size, body))


def trace_svg(path, traces: dict[str, np.ndarray], size: float = 480.0,
              log_scale: bool = False) -> None:
    """Per-method energy traces as polylines; optionally log-scaled ordinate."""
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")
    margin = 40.0
    w = h = size
    all_vals = np.concatenate([np.asarray(v, dtype=float) for v in traces.values()])
    if log_scale:
        all_vals = np.log10(np.maximum(all_vals, 1e-300))
    lo, hi = float(all_vals.min()), float(all_vals.max())
    if hi <= lo:
        hi = lo + 1.0
    max_len = max(len(v) for v in traces.values())
    lines = []
    for color, (name, vals) in zip(colors, sorted(traces.items())):
        vals = np.asarray(vals, dtype=float)
        if log_scale:
            vals = np.log10(np.maximum(vals, 1e-300))
        xs = margin + (w - 2 * margin) * np.arange(len(vals)) / max(max_len - 1, 1)
        ys = h - margin - (h - 2 * margin) * (vals - lo) / (hi - lo)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        lines.append(f'<text x="{margin:.0f}" y="{12 + 14 * len(lines) / 2:.0f}" '
                     f'fill="{color}" font-size="11">{name}</text>')
    frame = (f'<rect x="{margin}" y="{margin}" width="{w - 2 * margin}" '
             f'height="{h - 2 * margin}" fill="none" stroke="#888"/>')
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(_svg_document(w, h, frame + "\n" + "\n".join(lines)))
