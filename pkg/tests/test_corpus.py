import json
import struct
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridseg.alignment import AlignmentTier, PhoneClassTable, write_label_file
from hybridseg.corpus import (
    CorpusManifest,
    ManifestEntry,
    ToolConfig,
    WavFormatError,
    load_wav,
    read_duration_file,
    resample_linear,
    run_refine,
    validate_corpus,
    write_duration_file,
    write_wav,
)
from hybridseg.dsp import Waveform
from hybridseg.pipeline import DurationTargets
from hybridseg.synth import write_corpus

TABLE = PhoneClassTable.default()


def snapshot(out_dir: Path) -> dict:
    """Bytes of every output except the run summary, which records wall time."""
    return {
        str(p.relative_to(out_dir)): p.read_bytes()
        for p in sorted(out_dir.rglob("*"))
        if p.is_file() and p.name != "summary.json"
    }


# -- WAV --------------------------------------------------------------------


def test_pcm16_round_trip(tmp_path):
    x = 0.5 * np.sin(np.arange(2205) / 10)
    write_wav(tmp_path / "a.wav", Waveform(x, 22050))
    w = load_wav(tmp_path / "a.wav")
    assert w.sample_rate == 22050
    np.testing.assert_allclose(w.samples, x, atol=1 / 32768)


def test_float_wav(tmp_path):
    x = np.linspace(-1, 1, 100)
    write_wav(tmp_path / "f.wav", Waveform(x, 16000), pcm16=False)
    np.testing.assert_allclose(load_wav(tmp_path / "f.wav").samples, x.astype(np.float32))


def test_stereo_is_averaged(tmp_path):
    import scipy.io.wavfile

    data = np.stack([np.full(50, 1000, np.int16), np.full(50, 3000, np.int16)], axis=1)
    scipy.io.wavfile.write(tmp_path / "s.wav", 8000, data)
    w = load_wav(tmp_path / "s.wav")
    assert len(w.samples) == 50
    np.testing.assert_allclose(w.samples, 2000 / 32768)


def test_compressed_wav_rejected(tmp_path):
    # minimal RIFF header with an MPEG Layer 3 format tag
    fmt = struct.pack("<HHIIHH", 0x0055, 1, 16000, 2000, 1, 0)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", 4) + b"\0" * 4
    (tmp_path / "c.wav").write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(WavFormatError, match="0x0055"):
        load_wav(tmp_path / "c.wav")


def test_not_a_wav(tmp_path):
    (tmp_path / "x.wav").write_bytes(b"hello world, not audio")
    with pytest.raises(WavFormatError):
        load_wav(tmp_path / "x.wav")


def test_resample_warns(tmp_path):
    write_wav(tmp_path / "a.wav", Waveform(np.zeros(44100), 44100))
    with pytest.warns(UserWarning, match="resampling"):
        w = load_wav(tmp_path / "a.wav", target_rate=22050)
    assert w.sample_rate == 22050 and len(w.samples) == 22050


def test_resample_linear_line():
    w = Waveform(np.arange(100, dtype=float), 100)
    r = resample_linear(w, 50)
    np.testing.assert_allclose(r.samples, np.arange(50) * 2.0)


# -- manifest and config ----------------------------------------------------


def test_manifest_round_trip():
    m = CorpusManifest(
        (ManifestEntry("u1", "wav/u1.wav", "lab/u1.lab", "a b"), ManifestEntry("ü2", "w.wav", "l.lab")), "."
    )
    assert CorpusManifest.parse(m.dumps()) == m


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.text(min_size=1, max_size=8), st.text(max_size=10), st.one_of(st.none(), st.text(max_size=20))), max_size=8, unique_by=lambda t: t[0]))
def test_manifest_round_trip_random(items):
    m = CorpusManifest(tuple(ManifestEntry(u, f"{p}.wav", f"{p}.lab", t) for u, p, t in items))
    assert CorpusManifest.parse(m.dumps()) == m


def test_manifest_errors():
    with pytest.raises(ValueError, match="duplicate"):
        CorpusManifest.parse('{"utt_id": "a", "wav_path": "x", "lab_path": "y"}\n' * 2)
    with pytest.raises(ValueError, match="line 1"):
        CorpusManifest.parse('{"utt_id": "a"}\n')


def test_config_parse_and_overrides():
    cfg = ToolConfig.parse("# c\nhop_s = 0.005\ngd_wsf = 6\n", {"seed": "9", "time_unit": "seconds"})
    assert cfg.hop_s == 0.005 and cfg.gd_wsf == 6.0 and cfg.seed == 9 and cfg.time_unit == "seconds"
    assert cfg.hybrid().gd.wsf == 6.0


def test_config_dump_round_trip():
    cfg = ToolConfig(hop_s=0.0125, gd_lifter="rectangular", out_dir="x/y")
    assert ToolConfig.parse(cfg.dumps()) == cfg


@pytest.mark.parametrize("text", ["nope = 1", "hop_s = fast", "hop_s 0.01", "hop_s = 0.5", "time_unit = ms"])
def test_config_errors(text):
    with pytest.raises(ValueError):
        ToolConfig.parse(text)


def test_total_frames_modes():
    w = Waveform(np.zeros(16000), 16000)
    assert ToolConfig().total_frames(w) == (16000 - 400) // 160 + 1
    assert ToolConfig(total_frames_mode="centered").total_frames(w) == 101


def test_duration_file_round_trip():
    targets = {
        "u1": DurationTargets((("$", 3), ("a", 4), (".", 2)), 9, 0.01),
        "u:2": DurationTargets((("k", 1),), 1, 0.01),
    }
    text = write_duration_file(targets)
    assert text == "u1|$:3 a:4 .:2\nu:2|k:1\n"
    assert read_duration_file(text) == targets


# -- validation and refinement ----------------------------------------------


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    return write_corpus(root, 3, seed=11)


def test_validate_clean(corpus):
    report = validate_corpus(CorpusManifest.load(corpus), TABLE, ToolConfig())
    assert report.failures == [] and report.exit_code == 0 and report.n_utterances == 3


def test_validate_unknown_phone(corpus, tmp_path):
    m = CorpusManifest.load(corpus)
    e = m.entries[1]
    text = m.resolve(e.lab_path).read_text().replace(" a\n", " zz\n", 1)
    (tmp_path / "bad.lab").write_text(text)
    entries = list(m.entries)
    entries[1] = ManifestEntry(e.utt_id, str(m.resolve(e.wav_path)), str(tmp_path / "bad.lab"))
    report = validate_corpus(CorpusManifest(tuple(entries), m.root), TABLE, ToolConfig())
    assert len(report.failures) == 1
    utt, reason = report.failures[0]
    assert utt == e.utt_id and "zz" in reason
    assert report.exit_code == 1


def test_validate_duration_mismatch(corpus, tmp_path):
    m = CorpusManifest.load(corpus)
    e = m.entries[0]
    w = load_wav(m.resolve(e.wav_path))
    tier = AlignmentTier.from_boundaries([0.0, w.duration_s + 0.2], ["a"])
    (tmp_path / "long.lab").write_text(write_label_file(tier))
    bad = CorpusManifest((ManifestEntry("long", str(m.resolve(e.wav_path)), str(tmp_path / "long.lab")),))
    report = validate_corpus(bad, TABLE, ToolConfig())
    assert "duration mismatch" in report.failures[0][1]


def test_validate_missing_files(tmp_path):
    m = CorpusManifest((ManifestEntry("x", "missing.wav", "missing.lab"),), str(tmp_path))
    report = validate_corpus(m, TABLE, ToolConfig())
    assert report.failures[0][0] == "x" and "wav" in report.failures[0][1]


def test_refine_workers_identical(corpus, tmp_path):
    m = CorpusManifest.load(corpus)
    s1 = run_refine(m, ToolConfig(), workers=1, out_dir=tmp_path / "w1")
    s4 = run_refine(m, ToolConfig(), workers=4, out_dir=tmp_path / "w4")
    assert s1["n_ok"] == s4["n_ok"] == 3
    a, b = snapshot(tmp_path / "w1"), snapshot(tmp_path / "w4")
    assert a == b and len(a) == 7
    summary = json.loads((tmp_path / "w1" / "summary.json").read_text())
    assert summary["n_utterances"] == 3 and "wall_time_s" in summary
    assert all("mean_shift_ms" in r for r in summary["utterances"])


def test_refine_isolates_failures(corpus, tmp_path):
    m = CorpusManifest.load(corpus)
    entries = list(m.entries)
    entries[1] = ManifestEntry(entries[1].utt_id, "does/not/exist.wav", entries[1].lab_path)
    summary = run_refine(CorpusManifest(tuple(entries), m.root), ToolConfig(), out_dir=tmp_path / "o")
    assert summary["n_ok"] == 2 and summary["n_failed"] == 1
    assert summary["failures"][0]["utt_id"] == entries[1].utt_id
    lines = (tmp_path / "o" / "durations.txt").read_text().splitlines()
    assert [l.split("|")[0] for l in lines] == [entries[0].utt_id, entries[2].utt_id]
    assert not any(p.name.startswith(".") for p in (tmp_path / "o").rglob("*"))


def test_refine_empty_manifest(tmp_path):
    summary = run_refine(CorpusManifest(()), ToolConfig(), out_dir=tmp_path / "e")
    assert summary["n_utterances"] == 0 and summary["n_failed"] == 0
    assert (tmp_path / "e" / "durations.txt").read_text() == ""


def test_refined_durations_match_frame_budget(corpus, tmp_path):
    m = CorpusManifest.load(corpus)
    run_refine(m, ToolConfig(), out_dir=tmp_path / "d")
    targets = read_duration_file((tmp_path / "d" / "durations.txt").read_text())
    for e in m.entries:
        w = load_wav(m.resolve(e.wav_path))
        assert targets[e.utt_id].total_frames == ToolConfig().total_frames(w)
        assert targets[e.utt_id].entries[0][0] == "$" and targets[e.utt_id].entries[-1][0] == "."
