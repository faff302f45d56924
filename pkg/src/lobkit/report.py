"""Single-page HTML bundle of pipeline artifacts.

Scans a directory for the CSV/JSON files the subcommands emit and renders
tables plus small inline SVG step plots; no plotting dependency.
"""

from __future__ import annotations

import csv
import html
import json
from pathlib import Path


def _svg_steps(xs: list[float], ys: list[float], width: int = 420, height: int = 160) -> str:
    if len(xs) < 2:
        return "<p>(not enough points)</p>"
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys + [0.0]), max(ys + [1e-12])
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 8

    def sx(x: float) -> float:
        return pad + (x - x_lo) / (x_hi - x_lo) * (width - 2 * pad)

    def sy(y: float) -> float:
        return height - pad - (y - y_lo) / (y_hi - y_lo) * (height - 2 * pad)

    points = []
    for i, (x, y) in enumerate(zip(xs, ys)):
        if i > 0:
            points.append(f"{sx(x):.1f},{sy(ys[i - 1]):.1f}")
        points.append(f"{sx(x):.1f},{sy(y):.1f}")
    return (
        f'<svg width="{width}" height="{height}" style="background:#fafafa;border:1px solid #ddd">'
        f'<polyline fill="none" stroke="#15518a" stroke-width="1.5" points="{" ".join(points)}"/>'
        f'<text x="{pad}" y="{height - 2}" font-size="9">{x_lo:.3g} .. {x_hi:.3g}</text>'
        f'<text x="{pad}" y="{pad + 2}" font-size="9">{y_hi:.3g}</text>'
        "</svg>"
    )


def _table(rows: list[dict], limit: int = 12) -> str:
    if not rows:
        return "<p>(empty)</p>"
    cols = list(rows[0].keys())
    cells = ["<table><tr>" + "".join(f"<th>{html.escape(c)}</th>" for c in cols) + "</tr>"]
    for row in rows[:limit]:
        cells.append("<tr>" + "".join(f"<td>{html.escape(str(row[c]))}</td>" for c in cols) + "</tr>")
    cells.append("</table>")
    if len(rows) > limit:
        cells.append(f"<p>... {len(rows) - limit} more rows</p>")
    return "".join(cells)


def write_report(artifact_dir: Path, out: Path) -> None:
    sections: list[str] = []
    for path in sorted(artifact_dir.glob("*.json")):
        payload = json.loads(path.read_text())
        sections.append(f"<h2>{html.escape(path.name)}</h2><pre>{html.escape(json.dumps(payload, indent=2, sort_keys=True))}</pre>")
    for path in sorted(artifact_dir.glob("*.csv")):
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        section = [f"<h2>{html.escape(path.name)}</h2>", _table(rows)]
        if rows:
            cols = list(rows[0].keys())
            numeric_pairs = [
                ("time", "survival"),
                ("time", "incidence"),
                ("ratio", "prob_exceed"),
                ("delta", "saved_cost"),
            ]
            for xcol, ycol in numeric_pairs:
                if xcol in cols and ycol in cols:
                    try:
                        xs = [float(r[xcol]) for r in rows if r[ycol] != ""]
                        ys = [float(r[ycol]) for r in rows if r[ycol] != ""]
                        section.append(_svg_steps(xs, ys))
                    except ValueError:
                        pass
                    break
        sections.append("".join(section))
    body = "\n".join(sections) or "<p>No artifacts found.</p>"
    out.write_text(
        "<!doctype html><html><head><meta charset='utf-8'><title>lobkit report</title>"
        "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
        "td,th{border:1px solid #ccc;padding:2px 6px;font-size:12px}</style></head>"
        f"<body><h1>lobkit report</h1>{body}</body></html>"
    )
