"""Syllable boundaries from the group delay of a minimum-phase energy contour.

The smoothed short-term energy is treated as the magnitude spectrum of a
signal. Its causal, liftered inverse transform is close to minimum phase,
and the group delay of that signal resolves the energy lobes far better
than the energy itself: peaks sit on syllable nuclei, valleys on syllable
boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage
import scipy.signal

from hybridseg.dsp import FrameContour, FrameSpec, Waveform, short_term_energy

# below this dynamic range (relative to |tau|) the contour is treated as flat
FLAT_RTOL = 1e-9


@dataclass(frozen=True)
class GdConfig:
    wsf: float = 8.0
    min_peak_prominence: float = 0.05
    energy_smoothing_frames: int = 5
    denom_floor: float = 1e-12
    # "hann" tapers the retained coefficients; "rectangular" truncates and rings
    lifter: str = "hann"

    def __post_init__(self):
        if self.wsf < 1:
            raise ValueError(f"wsf must be >= 1, got {self.wsf}")
        if not 0 < self.min_peak_prominence < 1:
            raise ValueError(f"min_peak_prominence must be in (0, 1), got {self.min_peak_prominence}")
        if self.energy_smoothing_frames < 1 or self.energy_smoothing_frames % 2 == 0:
            raise ValueError("energy_smoothing_frames must be an odd integer >= 1")
        if self.denom_floor <= 0:
            raise ValueError("denom_floor must be positive")
        if self.lifter not in ("hann", "rectangular"):
            raise ValueError(f"unknown lifter {self.lifter!r}")

    def lifter_window(self, M: int) -> np.ndarray:
        """Weights for cepstral coefficients ``0..ceil(M / wsf)``."""
        n_keep = math.ceil(M / self.wsf)
        n = np.arange(n_keep + 1)
        if self.lifter == "rectangular":
            return np.ones(n_keep + 1)
        return 0.5 * (1.0 + np.cos(np.pi * n / (n_keep + 1)))


@dataclass(frozen=True)
class GdBoundaries:
    boundary_times_s: tuple[float, ...] = ()
    peak_times_s: tuple[float, ...] = ()
    boundary_frames: tuple[int, ...] = field(default=(), compare=False)
    peak_frames: tuple[int, ...] = field(default=(), compare=False)

    def shifted(self, offset_s: float) -> GdBoundaries:
        return GdBoundaries(
            tuple(t + offset_s for t in self.boundary_times_s),
            tuple(t + offset_s for t in self.peak_times_s),
            self.boundary_frames,
            self.peak_frames,
        )


def min_phase_group_delay(contour: FrameContour, cfg: GdConfig = GdConfig()) -> FrameContour:
    M = len(contour)
    if M < 4:
        raise ValueError(f"group delay needs at least 4 frames, got {M}")
    energy = scipy.ndimage.uniform_filter1d(
        np.asarray(contour.values, dtype=np.float64), cfg.energy_smoothing_frames, mode="nearest"
    )
    # peak normalisation keeps the absolute denominator floor from breaking amplitude invariance
    peak = energy.max()
    if peak > 0:
        energy = energy / peak
    # even-symmetric about 0 and M so the inverse transform is real
    mirrored = np.concatenate([energy, energy[-1:], energy[:0:-1]])
    root_cepstrum = np.fft.ifft(mirrored).real
    lifter = cfg.lifter_window(M)
    x = np.zeros(2 * M)
    x[: len(lifter)] = root_cepstrum[: len(lifter)] * lifter
    X = np.fft.fft(x)
    Y = np.fft.fft(np.arange(2 * M) * x)
    denom = np.maximum(X.real**2 + X.imag**2, cfg.denom_floor)
    tau = (X.real * Y.real + X.imag * Y.imag) / denom
    return FrameContour(tau[:M], contour.frame_spec, "group_delay", contour.sample_rate)


def detect_syllable_boundaries(tau: FrameContour, cfg: GdConfig = GdConfig()) -> GdBoundaries:
    values = np.asarray(tau.values, dtype=np.float64)
    if len(values) < 3:
        return GdBoundaries()
    span = float(values.max() - values.min())
    if span <= FLAT_RTOL * max(1.0, float(np.abs(values).max())):
        return GdBoundaries()
    # find_peaks never reports the first or last sample, which are mirroring artefacts
    peaks, _ = scipy.signal.find_peaks(values, prominence=cfg.min_peak_prominence * span)
    valleys = [int(lo + np.argmin(values[lo:hi])) for lo, hi in zip(peaks[:-1], peaks[1:])]
    return GdBoundaries(
        tuple(float(t) for t in tau.frame_spec.frame_time(np.array(valleys, dtype=int), tau.sample_rate)),
        tuple(float(t) for t in tau.frame_spec.frame_time(peaks, tau.sample_rate)),
        tuple(valleys),
        tuple(int(p) for p in peaks),
    )


def gd_boundaries_for_waveform(w: Waveform, spec: FrameSpec = FrameSpec(), cfg: GdConfig = GdConfig()) -> GdBoundaries:
    energy = short_term_energy(w, spec)
    return detect_syllable_boundaries(min_phase_group_delay(energy, cfg), cfg)
