"""Framing, short-term energy, spectra and mel cepstra.

Frames are never centred or padded: frame ``m`` covers samples
``[m * hop, m * hop + frame_len)`` and a trailing partial frame is dropped,
so the frame count is ``(len(samples) - frame_len) // hop + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.fft
import scipy.signal

WindowName = Literal["rectangular", "hamming", "hann"]
ContourKind = Literal["energy", "group_delay", "flux"]

LOG_FLOOR = 1e-10


class SignalTooShortError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional (mono)")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def scaled(self, factor: float) -> Waveform:
        return Waveform(self.samples * factor, self.sample_rate)


@dataclass(frozen=True)
class FrameSpec:
    """Frame grid in seconds.

    ``time_anchor`` picks the point of a frame reported as its time:
    ``"center"`` (default) is ``m * hop + frame_len / 2``, ``"start"`` is
    ``m * hop``. Every contour-index to seconds conversion goes through
    :meth:`frame_time`.
    """

    frame_len_s: float = 0.025
    hop_s: float = 0.010
    window: WindowName = "hamming"
    time_anchor: Literal["center", "start"] = "center"

    def __post_init__(self):
        if not 0 < self.hop_s <= self.frame_len_s:
            raise ValueError(f"need 0 < hop_s <= frame_len_s, got hop {self.hop_s}, frame {self.frame_len_s}")
        if self.window not in ("rectangular", "hamming", "hann"):
            raise ValueError(f"unknown window {self.window!r}")
        if self.time_anchor not in ("center", "start"):
            raise ValueError(f"unknown time anchor {self.time_anchor!r}")

    def frame_len(self, sample_rate: int) -> int:
        n = int(round(self.frame_len_s * sample_rate))
        if n < 2:
            raise ValueError(f"frame length of {n} samples at {sample_rate} Hz; need at least 2")
        return n

    def hop(self, sample_rate: int) -> int:
        return max(1, int(round(self.hop_s * sample_rate)))

    def n_frames(self, n_samples: int, sample_rate: int) -> int:
        flen = self.frame_len(sample_rate)
        if n_samples < flen:
            return 0
        return (n_samples - flen) // self.hop(sample_rate) + 1

    def anchor_offset_s(self, sample_rate: int) -> float:
        if self.time_anchor == "start":
            return 0.0
        return self.frame_len(sample_rate) / 2.0 / sample_rate

    def frame_time(self, m, sample_rate: int):
        """Seconds of frame index ``m`` (scalar or array)."""
        return np.asarray(m) * self.hop(sample_rate) / sample_rate + self.anchor_offset_s(sample_rate)

    def window_values(self, sample_rate: int) -> np.ndarray:
        n = self.frame_len(sample_rate)
        if self.window == "rectangular":
            return np.ones(n)
        return scipy.signal.get_window("hamming" if self.window == "hamming" else "hann", n, fftbins=True)


@dataclass(frozen=True, eq=False)
class FrameContour:
    values: np.ndarray
    frame_spec: FrameSpec
    kind: ContourKind
    sample_rate: int
    # added to every frame time; frame-difference contours sit between two frames
    time_offset_s: float = 0.0

    def __len__(self):
        return len(self.values)

    def times(self) -> np.ndarray:
        return self.frame_spec.frame_time(np.arange(len(self.values)), self.sample_rate) + self.time_offset_s

    def sliced(self, lo: int, hi: int) -> FrameContour:
        """Sub-contour of frames ``[lo, hi)``; its frame 0 is frame ``lo`` of this one."""
        return FrameContour(self.values[lo:hi], self.frame_spec, self.kind, self.sample_rate, self.time_offset_s)


@dataclass(frozen=True, eq=False)
class CepstraSequence:
    frames: np.ndarray  # (n_frames, D), c_1..c_D
    frame_spec: FrameSpec = field(default_factory=FrameSpec)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] < 1:
            raise ValueError(f"cepstra must be a 2-D array with D >= 1, got shape {frames.shape}")
        object.__setattr__(self, "frames", frames)

    @property
    def D(self) -> int:
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]


def frame_signal(w: Waveform, spec: FrameSpec) -> np.ndarray:
    """Windowed frames as an ``(M, frame_len)`` array."""
    flen = spec.frame_len(w.sample_rate)
    hop = spec.hop(w.sample_rate)
    if len(w.samples) < flen:
        raise SignalTooShortError(
            f"signal too short: {len(w.samples)} samples, frame needs {flen}"
        )
    frames = np.lib.stride_tricks.sliding_window_view(w.samples, flen)[::hop]
    return frames * spec.window_values(w.sample_rate)


def short_term_energy(w: Waveform, spec: FrameSpec) -> FrameContour:
    frames = frame_signal(w, spec)
    energy = np.mean(frames**2, axis=1)
    return FrameContour(energy, spec, "energy", w.sample_rate)


def _check_n_fft(n_fft: int, flen: int):
    if n_fft < flen:
        raise ValueError(f"n_fft={n_fft} is smaller than the frame length {flen}")
    if n_fft & (n_fft - 1):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")


def magnitude_spectrogram(w: Waveform, spec: FrameSpec, n_fft: int = 1024) -> np.ndarray:
    """Per-frame one-sided magnitudes, shape ``(M, n_fft // 2 + 1)``."""
    _check_n_fft(n_fft, spec.frame_len(w.sample_rate))
    frames = frame_signal(w, spec)
    return np.abs(np.fft.rfft(frames, n=n_fft, axis=1))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int, fmax: float | None = None) -> np.ndarray:
    """Triangular filters on the HTK mel scale, ``(n_mels, n_fft // 2 + 1)``."""
    nyquist = sample_rate / 2.0
    fmax = nyquist if fmax is None else fmax
    if fmax > nyquist:
        raise ValueError(f"top mel edge {fmax} Hz exceeds Nyquist {nyquist} Hz")
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    fb = np.zeros((n_mels, len(freqs)))
    for i in range(n_mels):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        fb[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def mel_cepstra(
    w: Waveform,
    spec: FrameSpec,
    n_fft: int = 1024,
    n_mels: int = 40,
    D: int = 24,
) -> CepstraSequence:
    if D < 1 or n_mels < D + 1:
        raise ValueError(f"need n_mels >= D + 1 and D >= 1, got n_mels={n_mels}, D={D}")
    power = magnitude_spectrogram(w, spec, n_fft) ** 2
    mel_power = power @ mel_filterbank(w.sample_rate, n_fft, n_mels).T
    log_mel = np.log(np.maximum(mel_power, LOG_FLOOR))
    ceps = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=1)
    return CepstraSequence(ceps[:, 1 : D + 1], spec)
