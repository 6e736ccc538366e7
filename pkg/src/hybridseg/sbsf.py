"""Sub-band spectral flux and class-gated boundary correction.

Sibilant fricatives and affricates carry their energy in the high band,
nasal murmur in the low band; a boundary next to one of those phones is
moved to the strongest flux frame near it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage

from hybridseg.alignment import AlignmentTier, LabeledInterval, PAUSE_CLASSES, PhoneClassTable, classify
from hybridseg.dsp import FrameContour, FrameSpec, Waveform, magnitude_spectrogram

HIGH_BAND_CLASSES = ("fricative", "affricate")
LOW_BAND_CLASSES = ("nasal",)


@dataclass(frozen=True)
class BandSpec:
    low_hz: float
    high_hz: float
    name: str = ""

    def check(self, sample_rate: int):
        if not 0 <= self.low_hz < self.high_hz <= sample_rate / 2:
            raise ValueError(
                f"band {self.name or ''}[{self.low_hz}, {self.high_hz}] Hz invalid for Nyquist {sample_rate / 2} Hz"
            )


@dataclass(frozen=True)
class SbsfConfig:
    high_band: BandSpec = field(default_factory=lambda: BandSpec(4000.0, 8000.0, "high"))
    low_band: BandSpec = field(default_factory=lambda: BandSpec(0.0, 600.0, "low"))
    search_window_s: float = 0.05
    flux_floor: float = 0.1
    # moving average of |X| across frequency; 0 keeps raw per-bin magnitudes
    smoothing_hz: float = 250.0

    def __post_init__(self):
        if self.smoothing_hz < 0:
            raise ValueError("smoothing_hz must be >= 0")
        if self.search_window_s <= 0:
            raise ValueError("search_window_s must be positive")
        if not 0 < self.flux_floor < 1:
            raise ValueError("flux_floor must be in (0, 1)")


def subband_spectral_flux(
    w: Waveform, spec: FrameSpec, n_fft: int, band: BandSpec, smoothing_hz: float = 250.0
) -> FrameContour:
    """Squared frame-to-frame change of L2-normalised magnitudes inside ``band``.

    Without frequency smoothing the per-bin magnitudes of a noise-like sound
    decorrelate from frame to frame, and the flux inside a fricative comes
    close to the flux at its edges.
    """
    band.check(w.sample_rate)
    mags = magnitude_spectrogram(w, spec, n_fft)
    width = int(round(smoothing_hz * n_fft / w.sample_rate))
    if width > 1:
        mags = scipy.ndimage.uniform_filter1d(mags, width, axis=1, mode="nearest")
    norms = np.linalg.norm(mags, axis=1, keepdims=True)
    mags = np.divide(mags, norms, out=np.zeros_like(mags), where=norms > 0)
    freqs = np.arange(mags.shape[1]) * w.sample_rate / n_fft
    in_band = (freqs >= band.low_hz) & (freqs <= band.high_hz)
    flux = np.zeros(len(mags))
    flux[1:] = np.sum(np.diff(mags[:, in_band], axis=0) ** 2, axis=1)
    # flux[m] compares frames m - 1 and m, so it is timed halfway between them
    half_hop = spec.hop(w.sample_rate) / w.sample_rate / 2
    return FrameContour(flux, spec, "flux", w.sample_rate, -half_hop)


def refine_boundary(boundary_s: float, flux: FrameContour, search_window_s: float, flux_floor: float) -> float:
    """Move ``boundary_s`` to the strongest flux frame within ``search_window_s``.

    The boundary is returned unchanged when no candidate reaches
    ``flux_floor`` times the global flux maximum. Ties go to the earlier frame.
    """
    values = np.asarray(flux.values)
    if len(values) == 0:
        return boundary_s
    global_max = float(values.max())
    if global_max <= 0:
        return boundary_s
    times = flux.times()
    eps = 1e-9
    lo = boundary_s - search_window_s
    hi = boundary_s + search_window_s
    candidates = np.flatnonzero((times >= lo - eps) & (times <= hi + eps))
    if len(candidates) == 0:
        return boundary_s
    best = candidates[np.argmax(values[candidates])]
    if values[best] < flux_floor * global_max:
        return boundary_s
    return float(times[best])


def refine_tier(
    tier: AlignmentTier,
    w: Waveform,
    table: PhoneClassTable,
    cfg: SbsfConfig = SbsfConfig(),
    spec: FrameSpec = FrameSpec(),
    n_fft: int = 1024,
    min_dur_frames: int = 1,
) -> AlignmentTier:
    """Correct boundaries adjacent to fricatives, affricates and nasals.

    Boundaries touching a silence or short pause are never moved. A move is
    clamped so both neighbouring intervals keep at least ``min_dur_frames``
    hops of duration (or their current duration, if already shorter).
    """
    # flux needs two frames to compare
    if len(tier) < 2 or spec.n_frames(len(w.samples), w.sample_rate) < 2:
        return tier
    classes = [classify(iv.symbol, table) for iv in tier]
    min_dur = min_dur_frames * spec.hop(w.sample_rate) / w.sample_rate
    flux_cache = {}

    def flux_for(band):
        if band not in flux_cache:
            flux_cache[band] = subband_spectral_flux(w, spec, n_fft, band, cfg.smoothing_hz)
        return flux_cache[band]

    times = tier.boundaries()
    for i in range(1, len(tier)):
        left, right = classes[i - 1], classes[i]
        if left in PAUSE_CLASSES or right in PAUSE_CLASSES:
            continue
        if left in HIGH_BAND_CLASSES or right in HIGH_BAND_CLASSES:
            band = cfg.high_band
        elif left in LOW_BAND_CLASSES or right in LOW_BAND_CLASSES:
            band = cfg.low_band
        else:
            continue
        b = times[i]
        lo = times[i - 1] + min(min_dur, b - times[i - 1])
        hi = times[i + 1] - min(min_dur, times[i + 1] - b)
        moved = refine_boundary(b, flux_for(band), cfg.search_window_s, cfg.flux_floor)
        if moved != b:
            times[i] = float(min(max(moved, lo), hi))
    return AlignmentTier(
        tuple(LabeledInterval(times[k], times[k + 1], iv.symbol) for k, iv in enumerate(tier)),
        tier.level,
    )
