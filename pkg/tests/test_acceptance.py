"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

The lines are also collected and repeated in the terminal summary (see conftest.py).
"""

import itertools
import math
import time

import numpy as np
import pytest

from hybridseg.alignment import AlignmentTier, PhoneClassTable, parse_label_file, write_label_file
from hybridseg.corpus import CorpusManifest, ManifestEntry, ToolConfig, read_duration_file, run_refine, write_duration_file
from hybridseg.dsp import FrameContour, FrameSpec, Waveform
from hybridseg.groupdelay import GdConfig, detect_syllable_boundaries, gd_boundaries_for_waveform, min_phase_group_delay
from hybridseg.metrics import dtw_align, mcd
from hybridseg.pipeline import HybridConfig, export_durations, hybrid_segment
from hybridseg.sbsf import refine_tier
from hybridseg.synth import bursts, onset_fixture, perturb, random_utterance, write_corpus

TABLE = PhoneClassTable.default()
RESULTS = {}


def report(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def test_criterion_1_boundary_recovery():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    init_err, out_err = [], []
    for _ in range(50):
        u = random_utterance(rng)
        initial = perturb(u.truth, rng, 0.03)
        out = hybrid_segment(u.waveform, initial, TABLE, HybridConfig())
        truth = np.array(u.truth.internal_boundaries())
        init_err.extend(np.abs(np.array(initial.internal_boundaries()) - truth))
        out_err.extend(np.abs(np.array(out.internal_boundaries()) - truth))
    elapsed = time.perf_counter() - t0
    e0, e1 = 1000 * np.mean(init_err), 1000 * np.mean(out_err)
    ratio = e1 / e0
    report(
        1,
        ratio <= 0.5 and elapsed < 60,
        f"mean |error| {e0:.2f} ms -> {e1:.2f} ms, ratio {ratio:.3f} (<= 0.50), {len(init_err)} boundaries, {elapsed:.1f} s (< 60 s)",
    )


def _lobe_contour(k, spacing=40, sigma=8.0):
    M = spacing * (k + 1)
    m = np.arange(M)
    centres = [spacing * (i + 1) for i in range(k)]
    values = 1e-3 + sum(np.exp(-0.5 * ((m - c) / sigma) ** 2) for c in centres)
    valleys = [(a + b) / 2 for a, b in zip(centres, centres[1:])]
    return FrameContour(values, FrameSpec(), "energy", 16000), valleys


def test_criterion_2_gd_segmentation():
    t0 = time.perf_counter()
    cfg = GdConfig()
    spec = FrameSpec()
    problems = []
    for k in range(2, 7):
        contour, valleys = _lobe_contour(k)
        gd = detect_syllable_boundaries(min_phase_group_delay(contour, cfg), cfg)
        if len(gd.boundary_frames) < k - 1:
            problems.append(f"lobes K={k}: {len(gd.boundary_frames)} boundaries")
        for v in valleys:
            if not any(abs(b - v) <= 2 for b in gd.boundary_frames):
                problems.append(f"lobes K={k}: no boundary within 2 frames of {v}")

        w, gaps = bursts(k)
        gd = gd_boundaries_for_waveform(w, spec, cfg)
        if len(gd.boundary_times_s) < k - 1:
            problems.append(f"bursts K={k}: {len(gd.boundary_times_s)} boundaries")
        tol = 2 * spec.hop_s
        for lo, hi in gaps:
            if not any(lo - tol <= b <= hi + tol for b in gd.boundary_times_s):
                problems.append(f"bursts K={k}: gap {lo:.3f}-{hi:.3f} s has no boundary")
    flat = FrameContour(np.full(200, 0.2), spec, "energy", 16000)
    if detect_syllable_boundaries(min_phase_group_delay(flat, cfg), cfg).boundary_times_s:
        problems.append("flat contour produced boundaries")
    if gd_boundaries_for_waveform(Waveform(np.zeros(16000), 16000), spec, cfg).boundary_times_s:
        problems.append("silence produced boundaries")
    elapsed = time.perf_counter() - t0
    detail = "; ".join(problems) if problems else "K=2..6 lobes and bursts: every gap hit within 2 frames; flat/silent -> 0"
    report(2, not problems and elapsed < 5, f"{detail}, {elapsed:.2f} s (< 5 s)")


def test_criterion_3_sbsf_onset():
    t0 = time.perf_counter()
    hits = 0
    for seed in range(100):
        u, initial, onset = onset_fixture(np.random.default_rng(10_000 + seed), offset_s=0.04)
        out = refine_tier(initial, u.waveform, TABLE)
        hits += abs(out.internal_boundaries()[0] - onset) <= 0.010 + 1e-9
    elapsed = time.perf_counter() - t0
    report(3, hits >= 95 and elapsed < 30, f"{hits}/100 onsets recovered within 1 frame (>= 95), {elapsed:.1f} s (< 30 s)")


def _brute_force_dtw(a, b):
    la, lb = len(a), len(b)
    best = math.inf
    # every path is a sequence of steps; enumerate sequences of length up to la + lb - 2
    for n_steps in range(max(la, lb) - 1, la + lb - 1):
        for steps in itertools.product(((1, 1), (1, 0), (0, 1)), repeat=n_steps):
            i = j = 0
            cost = float(np.linalg.norm(a[0] - b[0]))
            for di, dj in steps:
                i, j = i + di, j + dj
                if i >= la or j >= lb:
                    break
                cost += float(np.linalg.norm(a[i] - b[j]))
            else:
                if (i, j) == (la - 1, lb - 1):
                    best = min(best, cost)
    return best


def test_criterion_4_mcd_and_dtw():
    rng = np.random.default_rng(4)
    ref = rng.standard_normal((40, 24))
    syn = ref.copy()
    syn[:, 0] += 1.0
    value = mcd(ref, syn).mcd_db
    identical = mcd(ref, ref.copy()).mcd_db
    mismatches = 0
    for _ in range(200):
        la, lb = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        a, b = rng.standard_normal((la, 3)), rng.standard_normal((lb, 3))
        _, cost = dtw_align(a, b)
        if not math.isclose(cost, _brute_force_dtw(a, b), rel_tol=1e-12, abs_tol=1e-12):
            mismatches += 1
    ok = abs(value - 6.1419) <= 1e-3 and identical == 0.0 and mismatches == 0
    report(4, ok, f"delta=1 in c1 -> {value:.5f} dB (6.1419 +- 1e-3), identical -> {identical}, DTW vs brute force: {200 - mismatches}/200 equal")


def test_criterion_5_duration_export():
    rng = np.random.default_rng(5)
    bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        durs = rng.uniform(0.001, 0.4, n)
        hop = float(rng.choice([0.005, 0.01, 0.0116, 0.0125, 256 / 22050]))
        tier = AlignmentTier.from_boundaries(np.concatenate([[0.0], np.cumsum(durs)]), ["a"] * n)
        total = max(n, int(round(tier.end_s / hop)) + int(rng.integers(-3, 4)))
        if sum(c for _, c in export_durations(tier, hop, total).entries) != total:
            bad += 1
    cases = [
        (["SIL", "a", "sp", "k", "SIL"], ["$", "a", ",", "k", "."]),
        (["SIL", "a", "SIL"], ["$", "a", "."]),
        (["a", "k"], ["a", "k"]),
        (["SIL", "a"], ["$", "a"]),
        (["a", "SIL"], ["a", "."]),
        (["SIL"], ["$"]),
        (["SIL", "SIL"], ["$", "."]),
        (["sp", "a", "sp"], ["sp", "a", "sp"]),
        (["SIL", "sp", "SIL"], ["$", ",", "."]),
        (["SIL", "a", "sp", "sp", "i", "SIL"], ["$", "a", ",", ",", "i", "."]),
        (["SIL", "a", "SIL", "i", "SIL"], ["$", "a", "SIL", "i", "."]),
        (["a", "sp", "i"], ["a", ",", "i"]),
        (["sp"], ["sp"]),
        (["SIL", "k", "a", "m", "a", "l", "SIL"], ["$", "k", "a", "m", "a", "l", "."]),
        (["SIL", "s", "sp", "SIL"], ["$", "s", ",", "."]),
        (["m", "SIL", "SIL"], ["m", "SIL", "."]),
        (["SIL", "SIL", "a"], ["$", "SIL", "a"]),
        (["SIL", "sp"], ["$", "sp"]),
        (["sp", "SIL"], ["sp", "."]),
        (["SIL", "a", "sp", "i", "sp", "u", "SIL"], ["$", "a", ",", "i", ",", "u", "."]),
    ]
    wrong = []
    for symbols, expected in cases:
        tier = AlignmentTier.from_boundaries([0.1 * i for i in range(len(symbols) + 1)], symbols)
        got = [s for s, _ in export_durations(tier, 0.01, 10 * len(symbols)).entries]
        if got != expected:
            wrong.append((symbols, got))
    report(5, bad == 0 and not wrong, f"{1000 - bad}/1000 exact frame sums, {len(cases) - len(wrong)}/{len(cases)} symbol cases")


def test_criterion_6_round_trips():
    rng = np.random.default_rng(6)
    symbols = sorted(TABLE.classes)
    bad_labels = 0
    for _ in range(500):
        n = int(rng.integers(1, 60))
        ticks = np.cumsum(np.concatenate([[rng.integers(0, 10**7)], rng.integers(1, 5 * 10**6, n)]))
        text = "".join(f"{a} {b} {symbols[rng.integers(len(symbols))]}\n" for a, b in zip(ticks, ticks[1:]))
        tier = parse_label_file(text)
        if write_label_file(tier) != text or parse_label_file(write_label_file(tier)) != tier:
            bad_labels += 1
    manifest = CorpusManifest(tuple(ManifestEntry(f"u{i}", f"wav/u{i}.wav", f"lab/u{i}.lab", f"t {i} ü") for i in range(20)))
    manifest_ok = CorpusManifest.parse(manifest.dumps()) == manifest
    targets = {}
    for i in range(20):
        n = int(rng.integers(1, 15))
        tier = AlignmentTier.from_boundaries(np.concatenate([[0.0], np.cumsum(rng.uniform(0.02, 0.2, n))]), ["SIL"] + ["a"] * (n - 1))
        targets[f"utt{i}"] = export_durations(tier, 0.01, int(round(tier.end_s / 0.01)) + n)
    durations_ok = read_duration_file(write_duration_file(targets)) == targets
    ok = bad_labels == 0 and manifest_ok and durations_ok
    report(6, ok, f"{500 - bad_labels}/500 label files bitwise, manifest {'equal' if manifest_ok else 'DIFFERENT'}, duration targets {'equal' if durations_ok else 'DIFFERENT'}")


def _snapshot(out_dir):
    return {
        str(p.relative_to(out_dir)): p.read_bytes()
        for p in sorted(out_dir.rglob("*"))
        if p.is_file() and p.name != "summary.json"
    }


def test_criterion_7_parallel_determinism(tmp_path):
    manifest = CorpusManifest.load(write_corpus(tmp_path / "corpus", 50, seed=7))
    cfg = ToolConfig()
    snapshots = []
    for run in range(3):
        for workers in (1, 8):
            out = tmp_path / f"run{run}_w{workers}"
            summary = run_refine(manifest, cfg, workers=workers, out_dir=out)
            assert summary["n_ok"] == 50, summary["failures"]
            snapshots.append(_snapshot(out))
    identical = all(s == snapshots[0] for s in snapshots[1:])
    report(7, identical, f"6 runs (3 x workers 1 and 8) over 50 utterances, {len(snapshots[0])} files each, byte-identical: {identical}")


SYMBOLS = sorted(TABLE.classes)


def _random_case(rng, sr=16000):
    n = int(rng.integers(1, 9))
    symbols = [SYMBOLS[i] for i in rng.integers(len(SYMBOLS), size=n)]
    durs = rng.uniform(0.003, 0.09, n)
    start = float(rng.choice([0.0, rng.uniform(0, 0.02)]))
    edges = start + np.concatenate([[0.0], np.cumsum(durs)])
    n_samples = max(1, int((edges[-1] + rng.uniform(-0.009, 0.03)) * sr))
    kind = rng.integers(4)
    if kind == 0:
        x = np.zeros(n_samples)
    elif kind == 1:
        x = rng.uniform(-1, 1, n_samples)
    elif kind == 2:
        x = 0.5 * np.sin(2 * np.pi * rng.uniform(50, 7000) * np.arange(n_samples) / sr)
    else:
        x = rng.standard_normal(n_samples) * np.repeat(rng.uniform(0, 1, n_samples // 200 + 1), 200)[:n_samples]
    return Waveform(np.clip(x, -1, 1), sr), AlignmentTier.from_boundaries(edges, symbols)


def test_criterion_8_fuzz():
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    crashes, violations = [], 0
    for case in range(10_000):
        w, initial = _random_case(rng)
        try:
            out = hybrid_segment(w, initial, TABLE)
        except Exception as exc:  # any exception counts against the criterion
            crashes.append((case, repr(exc)))
            continue
        try:
            AlignmentTier(out.intervals, out.level)
        except ValueError:
            violations += 1
            continue
        if (
            out.symbols != initial.symbols
            or abs(out.end_s - initial.end_s) > 1e-9
            or abs(out.start_s - initial.start_s) > 1e-9
            or any(not iv.start_s < iv.end_s for iv in out)
        ):
            violations += 1
    elapsed = time.perf_counter() - t0
    detail = f"10000 cases: {len(crashes)} exceptions, {violations} invariant violations, {elapsed:.1f} s"
    if crashes:
        detail += f"; first: {crashes[0]}"
    report(8, not crashes and violations == 0, detail)
