"""Hybrid segmentation of one utterance and duration-target export."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from hybridseg.alignment import (
    AlignmentTier,
    LabeledInterval,
    PhoneClassTable,
    classify,
    speech_chunks,
    syllabify,
)
from hybridseg.dsp import FrameSpec, Waveform, short_term_energy
from hybridseg.groupdelay import GdBoundaries, GdConfig, detect_syllable_boundaries, min_phase_group_delay
from hybridseg.sbsf import SbsfConfig, refine_tier

EPS = 1e-9
PAUSE_SYMBOLS = ("SIL", "sp")


class PipelineInvariantError(RuntimeError):
    """A post-condition of hybrid segmentation failed; always a bug."""


@dataclass(frozen=True)
class HybridConfig:
    gd: GdConfig = field(default_factory=GdConfig)
    sbsf: SbsfConfig = field(default_factory=SbsfConfig)
    frame_spec: FrameSpec = field(default_factory=FrameSpec)
    n_fft: int = 1024
    max_snap_shift_s: float = 0.02
    min_phone_dur_frames: int = 1
    # stage switches, for ablations
    use_gd: bool = True
    use_sbsf: bool = True

    def __post_init__(self):
        if self.max_snap_shift_s <= 0:
            raise ValueError("max_snap_shift_s must be positive")
        if self.min_phone_dur_frames < 1:
            raise ValueError("min_phone_dur_frames must be >= 1")


def snap_syllable_boundaries(syll_bounds_s: Sequence[float], gd: GdBoundaries, max_shift_s: float) -> list[float]:
    """Move each boundary, earliest first, onto the nearest unused GD boundary within ``max_shift_s``."""
    original = [float(b) for b in syll_bounds_s]
    candidates = list(gd.boundary_times_s)
    used = set()
    snapped = list(original)
    for i, b in enumerate(original):
        best = None
        for j, g in enumerate(candidates):
            if j in used or abs(g - b) > max_shift_s + 1e-12:
                continue
            if best is None or abs(g - b) < abs(candidates[best] - b):
                best = j
        if best is not None:
            used.add(best)
            snapped[i] = candidates[best]
    # revert moves that break strict ordering until none remain
    changed = True
    while changed:
        changed = False
        for i in range(1, len(snapped)):
            if snapped[i] <= snapped[i - 1]:
                k = i if snapped[i] != original[i] else i - 1
                snapped[k] = original[k]
                changed = True
    return snapped


def redistribute_phones(
    old_bounds: Sequence[float], old_span: tuple[float, float], new_span: tuple[float, float]
) -> list[float]:
    """Rescale internal phone boundaries proportionally from ``old_span`` onto ``new_span``."""
    s0, e0 = old_span
    s1, e1 = new_span
    if not (s0 < e0 and s1 < e1):
        raise ValueError(f"degenerate syllable span {old_span} -> {new_span}")
    if (s0, e0) == (s1, e1):
        return [float(b) for b in old_bounds]
    scale = (e1 - s1) / (e0 - s0)
    return [s1 + (b - s0) * scale for b in old_bounds]


# (waveform, phones of one syllable, new (start, end)) -> internal boundaries
Realigner = Callable[[Waveform, Sequence[LabeledInterval], tuple], list]


def proportional_realigner(w: Waveform, phones: Sequence[LabeledInterval], new_span: tuple) -> list[float]:
    old_span = (phones[0].start_s, phones[-1].end_s)
    return redistribute_phones([p.start_s for p in phones[1:]], old_span, new_span)


def _chunk_gd(energy, lo_s: float, hi_s: float, cfg: HybridConfig) -> GdBoundaries:
    times = energy.times()
    frames = np.flatnonzero((times >= lo_s - EPS) & (times <= hi_s + EPS))
    if len(frames) < 4:
        return GdBoundaries()
    first = int(frames[0])
    sub = energy.sliced(first, int(frames[-1]) + 1)
    gd = detect_syllable_boundaries(min_phase_group_delay(sub, cfg.gd), cfg.gd)
    return gd.shifted(first * cfg.frame_spec.hop(energy.sample_rate) / energy.sample_rate)


def _span_ok(phones: Sequence[LabeledInterval], new_span, min_dur: float) -> bool:
    old = phones[-1].end_s - phones[0].start_s
    new = new_span[1] - new_span[0]
    if new <= 0:
        return False
    if new >= old:
        return True
    return min(p.duration_s for p in phones) * new / old >= min_dur - EPS


def hybrid_segment(
    w: Waveform,
    initial: AlignmentTier,
    table: PhoneClassTable,
    cfg: HybridConfig = HybridConfig(),
    realigner: Realigner = proportional_realigner,
) -> AlignmentTier:
    """Refine a phone tier with GD syllable snapping and SBSF correction.

    Boundaries touching silence or short pauses, and the tier edges, never move.
    """
    if len(initial) == 0:
        return initial
    for iv in initial:
        classify(iv.symbol, table)
    sr = w.sample_rate
    hop_s = cfg.frame_spec.hop(sr) / sr
    if initial.end_s > w.duration_s + hop_s + EPS:
        raise ValueError(f"tier ends at {initial.end_s:.4f} s but audio lasts {w.duration_s:.4f} s")
    min_dur = cfg.min_phone_dur_frames * hop_s

    times = initial.boundaries()
    syllables = syllabify(initial, table)
    enough_audio = cfg.use_gd and cfg.frame_spec.n_frames(len(w.samples), sr) >= 4
    energy = short_term_energy(w, cfg.frame_spec) if enough_audio else None

    for lo, hi in speech_chunks(initial, table):
        sylls = [s for s in syllables if lo <= s.lo and s.hi <= hi]
        if energy is None or len(sylls) < 2 or any(s.vowelless for s in sylls):
            continue
        gd = _chunk_gd(energy, times[lo], times[hi], cfg)
        if not gd.boundary_times_s:
            continue
        old = [times[s.lo] for s in sylls[1:]]
        new = snap_syllable_boundaries(old, gd, cfg.max_snap_shift_s)
        edges_old = [times[lo]] + old + [times[hi]]
        # undo moves that would squeeze a syllable's phones below the minimum
        changed = True
        while changed:
            changed = False
            edges_new = [times[lo]] + new + [times[hi]]
            for k, s in enumerate(sylls):
                phones = initial.intervals[s.lo : s.hi]
                if not _span_ok(phones, (edges_new[k], edges_new[k + 1]), min_dur):
                    for j in (k - 1, k):
                        if 0 <= j < len(new) and new[j] != old[j]:
                            new[j] = old[j]
                            changed = True
        edges_new = [times[lo]] + new + [times[hi]]
        for k, s in enumerate(sylls):
            span_old = (edges_old[k], edges_old[k + 1])
            span_new = (edges_new[k], edges_new[k + 1])
            if span_old == span_new:
                continue
            phones = initial.intervals[s.lo : s.hi]
            inner = realigner(w, phones, span_new)
            times[s.lo] = span_new[0]
            times[s.lo + 1 : s.hi] = inner
            times[s.hi] = span_new[1]

    snapped = AlignmentTier(
        tuple(LabeledInterval(times[k], times[k + 1], iv.symbol) for k, iv in enumerate(initial)),
        initial.level,
    )
    refined = snapped
    if cfg.use_sbsf:
        refined = refine_tier(snapped, w, table, cfg.sbsf, cfg.frame_spec, cfg.n_fft, cfg.min_phone_dur_frames)
    _check_output(initial, refined, min_dur)
    return refined


def _check_output(initial: AlignmentTier, out: AlignmentTier, min_dur: float):
    if out.symbols != initial.symbols:
        raise PipelineInvariantError("symbol sequence changed")
    if abs(out.start_s - initial.start_s) > EPS or abs(out.end_s - initial.end_s) > EPS:
        raise PipelineInvariantError("tier extent changed")
    for a, b in zip(initial, out):
        if a.duration_s >= min_dur - EPS and b.duration_s < min_dur - EPS:
            raise PipelineInvariantError(f"phone {b.symbol!r} at {b.start_s:.4f} s shorter than the minimum")


@dataclass(frozen=True)
class DurationTargets:
    entries: tuple[tuple[str, int], ...]
    total_frames: int
    hop_s: float

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((str(s), int(n)) for s, n in self.entries))
        if sum(n for _, n in self.entries) != self.total_frames:
            raise ValueError("frame counts do not sum to total_frames")
        if any(n < 0 for _, n in self.entries):
            raise ValueError("negative frame count")

    def to_line(self, utt_id: str) -> str:
        return f"{utt_id}|" + " ".join(f"{s}:{n}" for s, n in self.entries)

    @classmethod
    def parse_line(cls, line: str, hop_s: float = 0.01) -> tuple[str, DurationTargets]:
        utt_id, sep, body = line.rstrip("\n").partition("|")
        if not sep or not utt_id:
            raise ValueError(f"expected 'utt_id|sym:frames ...', got {line!r}")
        entries = []
        for item in body.split(" ") if body else []:
            sym, colon, n = item.rpartition(":")
            if not colon or not sym or not n.isdigit():
                raise ValueError(f"bad duration entry {item!r}")
            entries.append((sym, int(n)))
        return utt_id, cls(tuple(entries), sum(n for _, n in entries), hop_s)


def export_symbols(symbols: Sequence[str]) -> list[str]:
    out = list(symbols)
    for i, s in enumerate(symbols):
        if i == 0 and s == "SIL":
            out[i] = "$"
        elif i == len(symbols) - 1 and s == "SIL":
            out[i] = "."
        elif s == "sp" and 0 < i < len(symbols) - 1:
            out[i] = ","
    return out


def _largest_remainder(raw: np.ndarray, total: int) -> list[int]:
    counts = [int(math.floor(r)) for r in raw]
    rema = [float(r - c) for r, c in zip(raw, counts)]
    leftover = total - sum(counts)
    # stable sorts give ties to the earliest index
    order = sorted(range(len(raw)), key=lambda i: -rema[i])
    k = 0
    while leftover > 0:
        counts[order[k % len(order)]] += 1
        leftover -= 1
        k += 1
    order = sorted(range(len(raw)), key=lambda i: rema[i])
    k = 0
    while leftover < 0:
        i = order[k % len(order)]
        if counts[i] > 0:
            counts[i] -= 1
            leftover += 1
        k += 1
    return counts


def export_durations(tier: AlignmentTier, hop_s: float, total_frames: int) -> DurationTargets:
    """Integer frame counts per phone summing exactly to ``total_frames``.

    Raw counts ``duration / hop_s`` are rescaled to the budget when the tier
    and the frame grid disagree in length, then rounded by largest remainder.
    Non-pause phones left at zero frames borrow one from the longest entry.
    """
    n = len(tier)
    if total_frames < n:
        raise ValueError(f"frame budget too small: {total_frames} frames for {n} phones")
    if n == 0:
        if total_frames:
            raise ValueError(f"no phones to hold {total_frames} frames")
        return DurationTargets((), 0, hop_s)
    # rounding absorbs float noise such as 0.105 / 0.01 == 10.499999999999998
    raw = np.round(np.array([iv.duration_s for iv in tier]) / hop_s, 9)
    if raw.sum() > 0 and abs(raw.sum() - total_frames) > 1e-6:
        raw = np.round(raw * (total_frames / raw.sum()), 9)
    counts = _largest_remainder(raw, total_frames)
    symbols = tier.symbols
    for i in range(n):
        if counts[i] == 0 and symbols[i] not in PAUSE_SYMBOLS:
            donor = max(range(n), key=lambda j: (counts[j], -j))
            if counts[donor] >= 2:
                counts[donor] -= 1
                counts[i] += 1
    return DurationTargets(tuple(zip(export_symbols(symbols), counts)), total_frames, hop_s)
