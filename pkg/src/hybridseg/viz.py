"""SVG figure: alignment tiers over a spectrogram over the waveform, on one time axis."""

from __future__ import annotations

from html import escape
from typing import Mapping

import numpy as np

from hybridseg.alignment import AlignmentTier
from hybridseg.dsp import FrameSpec, Waveform, magnitude_spectrogram

LEFT = 80.0
RIGHT = 20.0
TOP = 10.0
TIER_H = 36.0
SPEC_H = 160.0
WAVE_H = 100.0
AXIS_H = 30.0
GAP = 8.0
MAX_SPEC_COLS = 240
SPEC_ROWS = 48


def _f(x: float) -> str:
    return f"{x:.2f}"


def _gray(v: float) -> str:
    g = int(round(255 * (1.0 - min(max(v, 0.0), 1.0))))
    return f"#{g:02x}{g:02x}{g:02x}"


def pixels_per_second(duration_s: float, width: int) -> float:
    return (width - LEFT - RIGHT) / duration_s


def render_alignment_svg(
    w: Waveform,
    tiers: Mapping[str, AlignmentTier],
    spec: FrameSpec = FrameSpec(),
    n_fft: int = 1024,
    width: int = 1200,
    dynamic_range_db: float = 70.0,
) -> str:
    if len(w.samples) == 0:
        raise ValueError("cannot render an empty waveform")
    if not tiers:
        raise ValueError("need at least one tier")
    duration = w.duration_s
    pps = pixels_per_second(duration, width)

    def x(t):
        return LEFT + t * pps

    height = TOP + len(tiers) * (TIER_H + GAP) + SPEC_H + GAP + WAVE_H + AXIS_H
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{_f(height)}" '
        f'viewBox="0 0 {width} {_f(height)}" font-family="sans-serif" font-size="12">',
        f'<rect class="background" x="0" y="0" width="{width}" height="{_f(height)}" fill="#ffffff"/>',
    ]

    y = TOP
    for name, tier in tiers.items():
        out.append(f'<g class="tier" data-name="{escape(name)}">')
        out.append(f'<text class="label" x="{_f(LEFT - 6)}" y="{_f(y + TIER_H / 2 + 4)}" text-anchor="end">{escape(name)}</text>')
        for iv in tier:
            x0, x1 = x(iv.start_s), x(iv.end_s)
            out.append(
                f'<rect class="interval" x="{_f(x0)}" y="{_f(y)}" width="{_f(x1 - x0)}" height="{_f(TIER_H)}" '
                f'fill="#eef3fb" stroke="#8090b0" stroke-width="0.5"/>'
            )
            out.append(
                f'<text class="symbol" x="{_f((x0 + x1) / 2)}" y="{_f(y + TIER_H / 2 + 4)}" text-anchor="middle">{escape(iv.symbol)}</text>'
            )
        for t in tier.boundaries():
            out.append(f'<line class="tick" x1="{_f(x(t))}" y1="{_f(y)}" x2="{_f(x(t))}" y2="{_f(y + TIER_H)}" stroke="#203060" stroke-width="1"/>')
        out.append("</g>")
        y += TIER_H + GAP

    out.append('<g class="spectrogram">')
    try:
        mags = magnitude_spectrogram(w, spec, n_fft)
    except ValueError:
        mags = np.zeros((0, n_fft // 2 + 1))
    if len(mags):
        db = 20.0 * np.log10(np.maximum(mags, 1e-10))
        db = np.clip((db - (db.max() - dynamic_range_db)) / dynamic_range_db, 0.0, 1.0)
        col_edges = np.linspace(0, len(db), min(MAX_SPEC_COLS, len(db)) + 1).astype(int)
        row_edges = np.linspace(0, db.shape[1], SPEC_ROWS + 1).astype(int)
        hop_s = spec.hop(w.sample_rate) / w.sample_rate
        col_w = pps * hop_s
        row_h = SPEC_H / SPEC_ROWS
        for c0, c1 in zip(col_edges[:-1], col_edges[1:]):
            if c1 <= c0:
                continue
            t0 = spec.frame_time(c0, w.sample_rate) - hop_s / 2
            block = db[c0:c1]
            for r, (b0, b1) in enumerate(zip(row_edges[:-1], row_edges[1:])):
                v = float(block[:, b0:b1].mean())
                if v <= 0.02:
                    continue
                out.append(
                    f'<rect class="spec" x="{_f(x(t0))}" y="{_f(y + SPEC_H - (r + 1) * row_h)}" '
                    f'width="{_f(col_w * (c1 - c0))}" height="{_f(row_h)}" fill="{_gray(v)}"/>'
                )
    out.append(f'<rect class="frame" x="{_f(LEFT)}" y="{_f(y)}" width="{_f(duration * pps)}" height="{_f(SPEC_H)}" fill="none" stroke="#606060"/>')
    out.append("</g>")
    y += SPEC_H + GAP

    n_cols = int(width - LEFT - RIGHT)
    edges = np.linspace(0, len(w.samples), n_cols + 1).astype(int)
    peak = max(float(np.abs(w.samples).max()), 1e-12)
    mid = y + WAVE_H / 2
    pts = []
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        seg = w.samples[a : max(b, a + 1)]
        px = LEFT + i + 0.5
        pts.append(f"{_f(px)},{_f(mid - seg.max() / peak * WAVE_H / 2)}")
        pts.append(f"{_f(px)},{_f(mid - seg.min() / peak * WAVE_H / 2)}")
    out.append(f'<polyline class="waveform" points="{" ".join(pts)}" fill="none" stroke="#303030" stroke-width="0.6"/>')
    y += WAVE_H

    out.append(f'<line class="axis" x1="{_f(LEFT)}" y1="{_f(y)}" x2="{_f(x(duration))}" y2="{_f(y)}" stroke="#000000"/>')
    step = _axis_step(duration)
    for t in np.arange(0.0, duration + 1e-9, step):
        out.append(f'<line class="axis-tick" x1="{_f(x(t))}" y1="{_f(y)}" x2="{_f(x(t))}" y2="{_f(y + 5)}" stroke="#000000"/>')
        out.append(f'<text class="axis-label" x="{_f(x(t))}" y="{_f(y + 18)}" text-anchor="middle">{t:.2f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _axis_step(duration: float) -> float:
    for step in (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0):
        if duration / step <= 12:
            return step
    return 30.0
