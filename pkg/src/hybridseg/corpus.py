"""Corpus I/O: WAV ingestion, manifests, tool configuration, validation and batch refinement."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import struct
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.io.wavfile

from hybridseg.alignment import PhoneClassTable, UnknownPhoneError, classify, parse_label_file, write_label_file
from hybridseg.dsp import FrameSpec, Waveform
from hybridseg.groupdelay import GdConfig
from hybridseg.pipeline import DurationTargets, HybridConfig, export_durations, hybrid_segment
from hybridseg.sbsf import BandSpec, SbsfConfig

log = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 1
WAVE_FORMAT_IEEE_FLOAT = 3
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class WavFormatError(ValueError):
    pass


def _fmt_chunk(path) -> tuple[int, int, int]:
    """(format tag, channels, bits per sample) read straight from the RIFF header."""
    with open(path, "rb") as f:
        head = f.read(12)
        if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
            raise WavFormatError(f"{path}: not a RIFF/WAVE file")
        while True:
            chunk = f.read(8)
            if len(chunk) < 8:
                raise WavFormatError(f"{path}: no fmt chunk")
            cid, size = struct.unpack("<4sI", chunk)
            if cid == b"fmt ":
                body = f.read(size)
                tag, channels, _, _, _, bits = struct.unpack("<HHIIHH", body[:16])
                if tag == WAVE_FORMAT_EXTENSIBLE and len(body) >= 26:
                    tag = struct.unpack("<H", body[24:26])[0]
                return tag, channels, bits
            f.seek(size + (size & 1), os.SEEK_CUR)


def load_wav(path, target_rate: Optional[int] = None) -> Waveform:
    """Read PCM16 or IEEE-float WAV as mono in [-1, 1].

    Channels are averaged. With ``target_rate`` set and different from the
    file's rate, the signal is linearly resampled and a warning is issued.
    """
    tag, channels, bits = _fmt_chunk(path)
    if not ((tag == WAVE_FORMAT_PCM and bits == 16) or (tag == WAVE_FORMAT_IEEE_FLOAT and bits in (32, 64))):
        raise WavFormatError(
            f"{path}: unsupported fmt chunk (format tag 0x{tag:04x}, {bits} bits); need PCM16 or IEEE float"
        )
    rate, data = scipy.io.wavfile.read(path)
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    else:
        data = data.astype(np.float64)
    if data.ndim == 2:
        data = data.mean(axis=1)
    w = Waveform(data, rate)
    if target_rate and target_rate != rate:
        warnings.warn(f"{path}: linearly resampling {rate} Hz -> {target_rate} Hz", stacklevel=2)
        w = resample_linear(w, target_rate)
    return w


def resample_linear(w: Waveform, target_rate: int) -> Waveform:
    n_out = int(round(len(w.samples) * target_rate / w.sample_rate))
    t_out = np.arange(n_out) / target_rate
    t_in = np.arange(len(w.samples)) / w.sample_rate
    return Waveform(np.interp(t_out, t_in, w.samples), target_rate)


def write_wav(path, w: Waveform, pcm16: bool = True):
    if pcm16:
        data = np.round(np.clip(w.samples, -1.0, 1.0 - 1.0 / 32768) * 32768).astype(np.int16)
    else:
        data = w.samples.astype(np.float32)
    scipy.io.wavfile.write(path, w.sample_rate, data)


# -- manifest ---------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    wav_path: str
    lab_path: str
    transcript: Optional[str] = None


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...] = ()
    root: str = "."

    def __post_init__(self):
        ids = [e.utt_id for e in self.entries]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ValueError(f"duplicate utt_id(s): {sorted(dup)}")

    def resolve(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.root) / p

    @classmethod
    def parse(cls, text: str, root=".") -> CorpusManifest:
        entries = []
        # split on LF only: str.splitlines would also break on U+2028 etc. inside JSON strings
        for lineno, line in enumerate(text.split("\n"), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entries.append(
                    ManifestEntry(str(obj["utt_id"]), str(obj["wav_path"]), str(obj["lab_path"]), obj.get("transcript"))
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"manifest line {lineno}: {exc}") from None
        return cls(tuple(entries), str(root))

    @classmethod
    def load(cls, path) -> CorpusManifest:
        path = Path(path)
        return cls.parse(path.read_text(encoding="utf-8"), root=path.parent)

    def dumps(self) -> str:
        lines = []
        for e in self.entries:
            obj = {"utt_id": e.utt_id, "wav_path": e.wav_path, "lab_path": e.lab_path}
            if e.transcript is not None:
                obj["transcript"] = e.transcript
            lines.append(json.dumps(obj, ensure_ascii=False))
        return "".join(line + "\n" for line in lines)


# -- configuration ----------------------------------------------------------


@dataclass
class ToolConfig:
    """Flat tool configuration; ``key = value`` files map one-to-one onto these fields."""

    frame_len_s: float = 0.025
    hop_s: float = 0.010
    window: str = "hamming"
    time_anchor: str = "center"
    n_fft: int = 1024
    gd_wsf: float = 8.0
    gd_min_peak_prominence: float = 0.05
    gd_energy_smoothing_frames: int = 5
    gd_denom_floor: float = 1e-12
    gd_lifter: str = "hann"
    sbsf_high_low_hz: float = 4000.0
    sbsf_high_high_hz: float = 8000.0
    sbsf_low_low_hz: float = 0.0
    sbsf_low_high_hz: float = 600.0
    sbsf_search_window_s: float = 0.05
    sbsf_flux_floor: float = 0.1
    sbsf_smoothing_hz: float = 250.0
    max_snap_shift_s: float = 0.02
    min_phone_dur_frames: int = 1
    phone_class_table_path: str = ""
    time_unit: str = "htk_100ns"
    target_sample_rate: int = 0
    # "frames": uncentred frame count; "centered": len // hop + 1
    total_frames_mode: str = "frames"
    out_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.type in ("float", float) and isinstance(value, int):
                setattr(self, f.name, float(value))
        if self.time_unit not in ("htk_100ns", "seconds"):
            raise ValueError(f"time_unit must be htk_100ns or seconds, got {self.time_unit!r}")
        if self.total_frames_mode not in ("frames", "centered"):
            raise ValueError(f"total_frames_mode must be frames or centered, got {self.total_frames_mode!r}")
        self.hybrid()  # validates every numeric range

    def hybrid(self) -> HybridConfig:
        return HybridConfig(
            gd=GdConfig(self.gd_wsf, self.gd_min_peak_prominence, self.gd_energy_smoothing_frames, self.gd_denom_floor, self.gd_lifter),
            sbsf=SbsfConfig(
                BandSpec(self.sbsf_high_low_hz, self.sbsf_high_high_hz, "high"),
                BandSpec(self.sbsf_low_low_hz, self.sbsf_low_high_hz, "low"),
                self.sbsf_search_window_s,
                self.sbsf_flux_floor,
                self.sbsf_smoothing_hz,
            ),
            frame_spec=FrameSpec(self.frame_len_s, self.hop_s, self.window, self.time_anchor),
            n_fft=self.n_fft,
            max_snap_shift_s=self.max_snap_shift_s,
            min_phone_dur_frames=self.min_phone_dur_frames,
        )

    def phone_table(self) -> PhoneClassTable:
        if self.phone_class_table_path:
            return PhoneClassTable.load(self.phone_class_table_path)
        return PhoneClassTable.default()

    def total_frames(self, w: Waveform) -> int:
        spec = self.hybrid().frame_spec
        if self.total_frames_mode == "centered":
            return len(w.samples) // spec.hop(w.sample_rate) + 1
        return spec.n_frames(len(w.samples), w.sample_rate)

    def dumps(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    @classmethod
    def coerce(cls, key: str, raw: str):
        fields = {f.name: f for f in dataclasses.fields(cls)}
        if key not in fields:
            raise ValueError(f"unknown config key {key!r}")
        kind = fields[key].type
        try:
            if kind in ("float", float):
                return float(raw)
            if kind in ("int", int):
                return int(raw)
        except ValueError:
            raise ValueError(f"config key {key!r}: cannot parse {raw!r}") from None
        return raw

    @classmethod
    def parse(cls, text: str, overrides: Optional[dict] = None) -> ToolConfig:
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, raw = line.partition("=")
            if not eq:
                raise ValueError(f"config line {lineno}: expected 'key = value'")
            key = key.strip()
            values[key] = cls.coerce(key, raw.strip())
        for key, raw in (overrides or {}).items():
            values[key] = cls.coerce(key, str(raw))
        return cls(**values)

    @classmethod
    def load(cls, path=None, overrides: Optional[dict] = None) -> ToolConfig:
        text = Path(path).read_text(encoding="utf-8") if path else ""
        return cls.parse(text, overrides)


# -- validation -------------------------------------------------------------


@dataclass
class ValidationReport:
    n_utterances: int = 0
    failures: list = field(default_factory=list)  # (utt_id, reason)

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


def validate_corpus(manifest: CorpusManifest, table: PhoneClassTable, config: ToolConfig) -> ValidationReport:
    report = ValidationReport(len(manifest.entries))
    hop = config.hop_s
    for e in manifest.entries:
        try:
            w = load_wav(manifest.resolve(e.wav_path), config.target_sample_rate or None)
        except (OSError, ValueError) as exc:
            report.failures.append((e.utt_id, f"wav unreadable: {exc}"))
            continue
        try:
            tier = parse_label_file(manifest.resolve(e.lab_path).read_text(encoding="utf-8"), config.time_unit)
        except (OSError, ValueError) as exc:
            report.failures.append((e.utt_id, f"label file invalid: {exc}"))
            continue
        if len(tier) == 0:
            report.failures.append((e.utt_id, "label file is empty"))
            continue
        unknown = []
        for sym in tier.symbols:
            try:
                classify(sym, table)
            except UnknownPhoneError:
                if sym not in unknown:
                    unknown.append(sym)
        if unknown:
            report.failures.append((e.utt_id, "unknown phone(s): " + ", ".join(unknown)))
        if tier.end_s > w.duration_s + hop + 1e-9:
            report.failures.append(
                (e.utt_id, f"duration mismatch: tier ends at {tier.end_s:.4f} s, audio is {w.duration_s:.4f} s")
            )
        elif config.total_frames(w) < len(tier):
            report.failures.append((e.utt_id, "frame budget too small for the number of phones"))
    return report


# -- batch refinement -------------------------------------------------------


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def refine_utterance(entry: ManifestEntry, root: str, config: ToolConfig, out_dir: str) -> dict:
    """Refine one utterance and write its label and duration files; returns its summary record."""
    manifest = CorpusManifest((), root)
    try:
        table = config.phone_table()
        w = load_wav(manifest.resolve(entry.wav_path), config.target_sample_rate or None)
        initial = parse_label_file(manifest.resolve(entry.lab_path).read_text(encoding="utf-8"), config.time_unit)
        cfg = config.hybrid()
        refined = hybrid_segment(w, initial, table, cfg)
        hop_s = cfg.frame_spec.hop(w.sample_rate) / w.sample_rate
        targets = export_durations(refined, hop_s, config.total_frames(w))
    except Exception as exc:  # isolate the batch from any single utterance
        return {"utt_id": entry.utt_id, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    out = Path(out_dir)
    _atomic_write(out / "labels" / f"{entry.utt_id}.lab", write_label_file(refined, config.time_unit))
    _atomic_write(out / "durations" / f"{entry.utt_id}.txt", targets.to_line(entry.utt_id) + "\n")
    shifts = np.abs(np.array(refined.boundaries()) - np.array(initial.boundaries())) * 1000.0
    return {
        "utt_id": entry.utt_id,
        "status": "ok",
        "n_phones": len(refined),
        "total_frames": targets.total_frames,
        "mean_shift_ms": round(float(shifts.mean()), 6),
        "max_shift_ms": round(float(shifts.max()), 6),
        "n_moved": int(np.sum(shifts > 1e-6)),
    }


def _refine_job(args):
    return refine_utterance(*args)


def run_refine(manifest: CorpusManifest, config: ToolConfig, workers: int = 1, out_dir=None) -> dict:
    """Refine every utterance; writes labels/, durations/, durations.txt and summary.json under ``out_dir``."""
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    jobs = [(e, manifest.root, config, str(out)) for e in manifest.entries]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_refine_job, jobs))
    else:
        records = [_refine_job(j) for j in jobs]
    # map() keeps manifest order, so aggregation is independent of scheduling
    lines = []
    for rec in records:
        if rec["status"] == "ok":
            lines.append((out / "durations" / f"{rec['utt_id']}.txt").read_text(encoding="utf-8"))
    _atomic_write(out / "durations.txt", "".join(lines))
    ok = [r for r in records if r["status"] == "ok"]
    summary = {
        "n_utterances": len(records),
        "n_ok": len(ok),
        "n_failed": len(records) - len(ok),
        "failures": [{"utt_id": r["utt_id"], "error": r["error"]} for r in records if r["status"] != "ok"],
        "mean_shift_ms": round(float(np.mean([r["mean_shift_ms"] for r in ok])), 6) if ok else 0.0,
        "utterances": records,
        "workers": workers,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    _atomic_write(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    return summary


def read_duration_file(text: str, hop_s: float = 0.01) -> dict:
    out = {}
    for line in text.split("\n"):
        if line.strip():
            utt, targets = DurationTargets.parse_line(line, hop_s)
            out[utt] = targets
    return out


def write_duration_file(targets: dict) -> str:
    return "".join(t.to_line(utt) + "\n" for utt, t in targets.items())
