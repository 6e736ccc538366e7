"""Synthetic utterances with known phone boundaries.

Vowels are harmonic complexes with two formant-like peaks, fricatives are
4-8 kHz band noise, nasals are a 150 Hz-dominant murmur, and silence is a
faint white noise floor. Used by the test suite and the experiment scripts.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hybridseg.alignment import AlignmentTier, write_label_file
from hybridseg.corpus import CorpusManifest, ManifestEntry, write_wav
from hybridseg.dsp import Waveform

VOWEL_FORMANTS = {
    "a": (750.0, 1250.0),
    "i": (300.0, 2300.0),
    "u": (320.0, 850.0),
    "e": (450.0, 1900.0),
    "o": (500.0, 950.0),
}
FRICATIVES = ("s",)
NASALS = ("m", "n")
NOISE_FLOOR = 1e-3


@dataclass(frozen=True, eq=False)
class SyntheticUtterance:
    waveform: Waveform
    truth: AlignmentTier


def vowel(n: int, sr: int, formants, rng: np.random.Generator, f0: float = 140.0, amp: float = 0.4) -> np.ndarray:
    t = np.arange(n) / sr
    out = np.zeros(n)
    phase0 = rng.uniform(0, 2 * np.pi)
    for h in range(1, int(4000 / f0)):
        f = h * f0
        gain = sum(1.0 / (1.0 + ((f - fc) / 120.0) ** 2) for fc in formants) + 0.02
        out += gain * np.sin(2 * np.pi * f * t + h * phase0)
    return amp * out / np.sqrt(np.mean(out**2))


def band_noise(n: int, sr: int, lo: float, hi: float, rng: np.random.Generator, amp: float = 0.15) -> np.ndarray:
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    spectrum[(freqs < lo) | (freqs > hi)] = 0.0
    out = np.fft.irfft(spectrum, n)
    rms = np.sqrt(np.mean(out**2))
    return amp * out / rms if rms > 0 else out


def nasal(n: int, sr: int, rng: np.random.Generator, amp: float = 0.25) -> np.ndarray:
    t = np.arange(n) / sr
    phase = rng.uniform(0, 2 * np.pi)
    out = np.sin(2 * np.pi * 150.0 * t + phase) + 0.08 * np.sin(2 * np.pi * 300.0 * t) + 0.03 * np.sin(2 * np.pi * 2500.0 * t)
    return amp * out / np.sqrt(np.mean(out**2))


def render_phone(symbol: str, n: int, sr: int, rng: np.random.Generator) -> np.ndarray:
    if symbol in VOWEL_FORMANTS:
        return vowel(n, sr, VOWEL_FORMANTS[symbol], rng, f0=rng.uniform(110, 180))
    if symbol in FRICATIVES:
        return band_noise(n, sr, 4000.0, 8000.0, rng)
    if symbol in NASALS:
        return nasal(n, sr, rng)
    if symbol in ("SIL", "sp"):
        return np.zeros(n)
    raise ValueError(f"no synthetic recipe for {symbol!r}")


def render(symbols, durations_s, sr: int, rng: np.random.Generator) -> SyntheticUtterance:
    """Concatenate phones; boundaries are snapped to the sample grid."""
    edges = np.round(np.concatenate([[0.0], np.cumsum(durations_s)]) * sr).astype(int)
    parts = [render_phone(s, edges[i + 1] - edges[i], sr, rng) for i, s in enumerate(symbols)]
    samples = np.concatenate(parts) + NOISE_FLOOR * rng.standard_normal(edges[-1])
    truth = AlignmentTier.from_boundaries(edges / sr, symbols)
    return SyntheticUtterance(Waveform(np.clip(samples, -1.0, 1.0), sr), truth)


def random_word(rng: np.random.Generator, n_syllables: int) -> list[str]:
    consonants = FRICATIVES + NASALS
    vowels = tuple(VOWEL_FORMANTS)
    word = []
    for _ in range(n_syllables):
        word.append(consonants[rng.integers(len(consonants))])
        word.append(vowels[rng.integers(len(vowels))])
    if rng.random() < 0.5:
        word.append(consonants[rng.integers(len(consonants))])
    return word


def random_utterance(rng: np.random.Generator, sr: int = 16000, n_words: int | None = None) -> SyntheticUtterance:
    """``SIL word SIL word ... SIL`` with CV syllables over {s, m, n} x vowels."""
    n_words = int(rng.integers(2, 4)) if n_words is None else n_words
    symbols = ["SIL"]
    for _ in range(n_words):
        symbols += random_word(rng, int(rng.integers(3, 6)))
        symbols.append("SIL")
    durations = []
    for s in symbols:
        if s == "SIL":
            durations.append(rng.uniform(0.15, 0.25))
        elif s in VOWEL_FORMANTS:
            durations.append(rng.uniform(0.10, 0.18))
        else:
            durations.append(rng.uniform(0.07, 0.12))
    return render(symbols, durations, sr, rng)


def onset_fixture(rng: np.random.Generator, sr: int = 16000, offset_s: float = 0.04):
    """Vowel, fricative, vowel with the fricative onset misplaced by ``offset_s`` in a random direction.

    Returns ``(utterance, initial_tier, true_onset_s)``.
    """
    v1 = tuple(VOWEL_FORMANTS)[rng.integers(len(VOWEL_FORMANTS))]
    v2 = tuple(VOWEL_FORMANTS)[rng.integers(len(VOWEL_FORMANTS))]
    durations = [rng.uniform(0.15, 0.30), rng.uniform(0.15, 0.25), rng.uniform(0.15, 0.30)]
    u = render([v1, "s", v2], durations, sr, rng)
    onset = u.truth.internal_boundaries()[0]
    times = u.truth.boundaries()
    times[1] = onset + offset_s * (1 if rng.random() < 0.5 else -1)
    return u, AlignmentTier.from_boundaries(times, u.truth.symbols), onset


def perturb(tier: AlignmentTier, rng: np.random.Generator, max_shift_s: float = 0.03) -> AlignmentTier:
    """Shift every internal boundary by i.i.d. uniform noise in ``[-max_shift_s, max_shift_s]``.

    The tier edges stay fixed. Callers must keep phones longer than
    ``2 * max_shift_s`` so the order survives.
    """
    times = np.array(tier.boundaries())
    times[1:-1] += rng.uniform(-max_shift_s, max_shift_s, len(times) - 2)
    if np.any(np.diff(times) <= 0):
        raise ValueError("perturbation reordered boundaries; phones too short for this shift")
    return AlignmentTier.from_boundaries(times, tier.symbols, tier.level)


def bursts(
    n_bursts: int,
    sr: int = 16000,
    burst_s: float = 0.3,
    gap_s: float = 0.1,
    edge_s: float = 0.05,
    freq: float = 440.0,
    amp: float = 0.5,
):
    """Tone bursts separated by silent gaps; returns the waveform and the ``(start, end)`` of each gap."""
    t = np.arange(int(round(burst_s * sr))) / sr
    tone = amp * np.sin(2 * np.pi * freq * t)
    parts = [np.zeros(int(round(edge_s * sr)))]
    gaps = []
    pos = len(parts[0])
    for k in range(n_bursts):
        parts.append(tone)
        pos += len(tone)
        if k < n_bursts - 1:
            n_gap = int(round(gap_s * sr))
            parts.append(np.zeros(n_gap))
            gaps.append((pos / sr, (pos + n_gap) / sr))
            pos += n_gap
    parts.append(np.zeros(int(round(edge_s * sr))))
    return Waveform(np.concatenate(parts), sr), gaps


def write_corpus(out_dir, n_utterances: int, seed: int = 0, sr: int = 16000, max_shift_s: float = 0.03) -> Path:
    """Write ``wav/``, perturbed ``lab/``, true ``ref/`` labels and ``manifest.jsonl``; returns the manifest path."""
    out = Path(out_dir)
    for sub in ("wav", "lab", "ref"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for k in range(n_utterances):
        utt = f"utt{k:04d}"
        u = random_utterance(rng, sr)
        write_wav(out / "wav" / f"{utt}.wav", u.waveform, pcm16=False)
        (out / "ref" / f"{utt}.lab").write_text(write_label_file(u.truth), encoding="utf-8")
        (out / "lab" / f"{utt}.lab").write_text(write_label_file(perturb(u.truth, rng, max_shift_s)), encoding="utf-8")
        entries.append(ManifestEntry(utt, f"wav/{utt}.wav", f"lab/{utt}.lab", " ".join(u.truth.symbols)))
    path = out / "manifest.jsonl"
    path.write_text(CorpusManifest(tuple(entries), str(out)).dumps(), encoding="utf-8")
    return path
