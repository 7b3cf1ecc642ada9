"""Minimal static SVG renderings of the explanation exports.

Output depends only on the input data; coordinates are printed with two
decimals so identical data gives byte-identical files.
"""

from __future__ import annotations

import math
from html import escape
from typing import Sequence

import numpy as np

WIDTH = 720
LABEL_W = 170
MARGIN = 20
ROW_H = 22
POS_COLOR = "#d6274d"
NEG_COLOR = "#1f88e5"


def _f(v: float) -> str:
    return f"{v:.2f}"


def _doc(height: float, body: list[str], title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{_f(height)}" '
        f'viewBox="0 0 {WIDTH} {_f(height)}" font-family="sans-serif" font-size="11">'
    )
    return "\n".join([
        head,
        f'<rect width="{WIDTH}" height="{_f(height)}" fill="white"/>',
        f'<text x="{MARGIN}" y="16" font-size="13" font-weight="bold">{escape(title)}</text>',
        *body,
        "</svg>",
        "",
    ])


def _scale(lo: float, hi: float, a: float, b: float):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        lo, hi = lo - 1.0, lo + 1.0
    return lambda v: a + (v - lo) / (hi - lo) * (b - a)


def _colour(p: float) -> str:
    """Blue (low) to red (high) for a percentile in [0, 1]."""
    p = min(1.0, max(0.0, p))
    r = int(round(0x1f + p * (0xd6 - 0x1f)))
    g = int(round(0x88 + p * (0x27 - 0x88)))
    b = int(round(0xe5 + p * (0x4d - 0xe5)))
    return f"#{r:02x}{g:02x}{b:02x}"


def importance_bars(ranking: Sequence[tuple[str, float]], title: str = "mean |SHAP value|") -> str:
    height = 40 + ROW_H * len(ranking) + MARGIN
    top = max([s for _, s in ranking] + [0.0])
    x = _scale(0.0, top if top > 0 else 1.0, LABEL_W, WIDTH - MARGIN - 60)
    body = []
    for i, (name, score) in enumerate(ranking):
        y = 30 + i * ROW_H
        body.append(f'<text x="{LABEL_W - 6}" y="{_f(y + 14)}" text-anchor="end">{escape(name)}</text>')
        body.append(
            f'<rect x="{LABEL_W}" y="{_f(y + 3)}" width="{_f(x(score) - LABEL_W)}" '
            f'height="{ROW_H - 6}" fill="{NEG_COLOR}"/>'
        )
        body.append(f'<text x="{_f(x(score) + 4)}" y="{_f(y + 14)}">{score:.4g}</text>')
    return _doc(height, body, title)


def beeswarm(rows: Sequence[dict], title: str = "SHAP value by feature") -> str:
    """Rows in ``beeswarm_data`` format; dots are jittered deterministically."""
    features = list(dict.fromkeys(r["feature"] for r in rows))
    height = 60 + ROW_H * len(features) + MARGIN
    vals = [r["shap_value"] for r in rows] or [0.0]
    lo, hi = min(vals), max(vals)
    x = _scale(min(lo, 0.0), max(hi, 0.0), LABEL_W, WIDTH - MARGIN)
    body = [f'<line x1="{_f(x(0.0))}" y1="30" x2="{_f(x(0.0))}" y2="{_f(height - 30)}" stroke="#999"/>']
    for i, name in enumerate(features):
        yc = 30 + i * ROW_H + ROW_H / 2
        body.append(f'<text x="{LABEL_W - 6}" y="{_f(yc + 4)}" text-anchor="end">{escape(name)}</text>')
    index = {f: i for i, f in enumerate(features)}
    for k, r in enumerate(rows):
        yc = 30 + index[r["feature"]] * ROW_H + ROW_H / 2
        jitter = ((k * 2654435761) % 1000) / 1000.0 - 0.5
        body.append(
            f'<circle cx="{_f(x(r["shap_value"]))}" cy="{_f(yc + jitter * (ROW_H - 8))}" r="2" '
            f'fill="{_colour(r["feature_value_percentile"])}" fill-opacity="0.7"/>'
        )
    body.append(f'<text x="{_f(x(lo))}" y="{_f(height - 12)}">{lo:.3g}</text>')
    body.append(f'<text x="{_f(x(hi))}" y="{_f(height - 12)}" text-anchor="end">{hi:.3g}</text>')
    return _doc(height, body, title)


def force_plot(record: dict, max_features: int = 12, title: str | None = None) -> str:
    """Waterfall from the base value to the prediction (``ForceRecord.to_dict`` input)."""
    contrib = list(record["contributions"])
    shown, rest = contrib[:max_features], contrib[max_features:]
    steps = [(c["feature"], c["shap_value"]) for c in shown]
    if rest:
        steps.append((f"{len(rest)} other features", float(sum(c["shap_value"] for c in rest))))
    base = record["base_value"]
    run = [base]
    for _, v in steps:
        run.append(run[-1] + v)
    x = _scale(min(run), max(run), LABEL_W, WIDTH - MARGIN - 60)
    height = 70 + ROW_H * len(steps) + MARGIN
    body = []
    for i, ((name, v), start) in enumerate(zip(steps, run)):
        y = 30 + i * ROW_H
        a, b = sorted((x(start), x(start + v)))
        colour = POS_COLOR if v > 0 else NEG_COLOR
        body.append(f'<text x="{LABEL_W - 6}" y="{_f(y + 14)}" text-anchor="end">{escape(name)}</text>')
        body.append(
            f'<rect x="{_f(a)}" y="{_f(y + 3)}" width="{_f(max(b - a, 0.5))}" height="{ROW_H - 6}" fill="{colour}"/>'
        )
        body.append(f'<text x="{_f(b + 4)}" y="{_f(y + 14)}">{v:+.4g}</text>')
    yb = 30 + len(steps) * ROW_H + 16
    euro = record.get("prediction_euro")
    euro_txt = f", EUR {euro:,.0f}" if euro is not None else ""
    body.append(
        f'<text x="{MARGIN}" y="{_f(yb)}">base {base:.4g} &#8594; prediction '
        f'{record["prediction_transformed"]:.4g}{euro_txt}</text>'
    )
    return _doc(height, body, title or f"row {record['row_id']}")


def xy_plot(xs, ys, title: str, xlabel: str, ylabel: str, line: bool = False) -> str:
    """Scatter (or polyline when ``line``) of finite ``(xs, ys)`` pairs."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ok = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = xs[ok], ys[ok]
    height = 360
    left, right, top, bottom = 70, WIDTH - MARGIN, 30, height - 40
    if len(xs):
        x = _scale(float(xs.min()), float(xs.max()), left, right)
        y = _scale(float(ys.min()), float(ys.max()), bottom, top)
    else:
        x = _scale(0.0, 1.0, left, right)
        y = _scale(0.0, 1.0, bottom, top)
    body = [
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="#333"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="#333"/>',
        f'<text x="{(left + right) // 2}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{(top + bottom) // 2}" transform="rotate(-90 14 {(top + bottom) // 2})" '
        f'text-anchor="middle">{escape(ylabel)}</text>',
    ]
    if len(xs):
        body += [
            f'<text x="{left}" y="{bottom + 14}">{xs.min():.4g}</text>',
            f'<text x="{right}" y="{bottom + 14}" text-anchor="end">{xs.max():.4g}</text>',
            f'<text x="{left - 4}" y="{bottom}" text-anchor="end">{ys.min():.4g}</text>',
            f'<text x="{left - 4}" y="{top + 8}" text-anchor="end">{ys.max():.4g}</text>',
        ]
    if line and len(xs):
        pts = " ".join(f"{_f(x(a))},{_f(y(b))}" for a, b in zip(xs, ys))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{POS_COLOR}" stroke-width="2"/>')
    else:
        body += [
            f'<circle cx="{_f(x(a))}" cy="{_f(y(b))}" r="2" fill="{NEG_COLOR}" fill-opacity="0.6"/>'
            for a, b in zip(xs, ys)
        ]
    return _doc(height, body, title)
