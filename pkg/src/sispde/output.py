"""Deterministic CSV, SVG and manifest writers."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .solver import atomic_write_text

MANIFEST = "manifest.json"


def fmt(v) -> str:
    """Round-trip float formatting; integers stay integers."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(c) for c in r) for r in rows)
    return "\n".join(lines) + "\n"


def density_csv(traj, values=None) -> str:
    """Columns t, x, value; one block per snapshot."""
    rows = []
    vals = traj.values() if values is None else values
    for t, snap, v in zip(traj.times, traj.snapshots, vals):
        for x, u in zip(snap.grid.centers, v):
            rows.append((t, x, u))
    return csv_text(("t", "x", "value"), rows)


def ledger_csv(traj) -> str:
    return csv_text(("step", "t", "mass"),
                    zip(traj.ledger_steps, traj.ledger_times, traj.mass_ledger))


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    k0 = math.ceil(lo / step)
    out = []
    # indexed so that a span below the ulp of lo still terminates
    for k in range(k0, k0 + 4 * n):
        v = k * step
        if v > hi + 1e-9 * step:
            break
        if not out or round(v, 12) != out[-1]:
            out.append(round(v, 12))
    return out


def svg_plot(series, xlabel: str, ylabel: str, title: str = "", width=640, height=420) -> str:
    """Line plot of ``series`` = [(label, xs, ys), ...] with labelled axes."""
    ml, mr, mt, mb = 70, 20, 30, 50
    pts = [(np.asarray(xs, float), np.asarray(ys, float)) for _, xs, ys in series]
    finite = [v for xs, ys in pts for v in ys[np.isfinite(ys)]]
    allx = [v for xs, _ in pts for v in xs]
    x0, x1 = (min(allx), max(allx)) if allx else (0.0, 1.0)
    y0, y1 = (min(finite), max(finite)) if finite else (0.0, 1.0)
    # a series constant up to round-off (the mass ledger) gets a unit window
    if y1 - y0 <= 1e-9 * max(abs(y0), abs(y1)) or y1 == y0:
        mid = 0.5 * (y0 + y1)
        half = max(0.5, 1e-3 * abs(mid))
        y0, y1 = mid - half, mid + half
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pw, ph = width - ml - mr, height - mt - mb
    sx = lambda v: ml + (v - x0) / (x1 - x0) * pw
    sy = lambda v: mt + ph - (v - y0) / (y1 - y0) * ph
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in _ticks(x0, x1):
        X = sx(v)
        out.append(f'<line x1="{X:.2f}" y1="{mt + ph}" x2="{X:.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{mt + ph + 18}" text-anchor="middle">{v:g}</text>')
    for v in _ticks(y0, y1):
        Y = sy(v)
        out.append(f'<line x1="{ml - 5}" y1="{Y:.2f}" x2="{ml}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{Y + 4:.2f}" text-anchor="end">{v:.4g}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {mt + ph / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="18" text-anchor="middle">{escape(title)}</text>')
    n = max(1, len(series))
    for i, ((label, _, _), (xs, ys)) in enumerate(zip(series, pts)):
        shade = int(200 * i / max(1, n - 1)) if n > 1 else 0
        colour = f"rgb({shade},{60},{200 - shade})"
        ok = np.isfinite(ys)
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs[ok], ys[ok]))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{coords}">'
                   f'<title>{escape(str(label))}</title></polyline>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_outputs(artifacts: dict, out_dir, config: dict, chash: str) -> dict:
    """Write every artifact atomically, then the manifest.

    ``artifacts`` maps file name to text. The manifest lists names, byte
    sizes and SHA-256 digests together with the config and its hash.

    Raises:
        OSError: with the offending path in the message.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    files = []
    for name in sorted(artifacts):
        data = artifacts[name]
        path = out / name
        try:
            atomic_write_text(path, data)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        raw = data.encode()
        files.append({"name": name, "size": len(raw), "sha256": hashlib.sha256(raw).hexdigest()})
    manifest = {"config": config, "config_hash": chash, "files": files}
    atomic_write_text(out / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
