"""Command-line entry point.

Exit codes: 0 success, 1 validation failure or evaluation mismatch,
2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from hybridseg.alignment import parse_label_file
from hybridseg.corpus import (
    CorpusManifest,
    ToolConfig,
    WavFormatError,
    load_wav,
    run_refine,
    validate_corpus,
)
from hybridseg.dsp import mel_cepstra, short_term_energy
from hybridseg.groupdelay import detect_syllable_boundaries, min_phase_group_delay
from hybridseg.metrics import TierMismatchError, boundary_diff, mcd, paired_permutation_test, summarize_diffs
from hybridseg.pipeline import export_durations
from hybridseg.sbsf import BandSpec, subband_spectral_flux
from hybridseg.viz import render_alignment_svg

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("hybridseg")


def _config(args) -> ToolConfig:
    overrides = {}
    for item in args.set or []:
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    if getattr(args, "time_unit", None):
        overrides["time_unit"] = args.time_unit
    if getattr(args, "out_dir", None):
        overrides["out_dir"] = args.out_dir
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return ToolConfig.load(args.config, overrides)


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def cmd_validate(args) -> int:
    cfg = _config(args)
    report = validate_corpus(CorpusManifest.load(args.manifest), cfg.phone_table(), cfg)
    for utt, reason in report.failures:
        print(f"{utt}\t{reason}")
    print(f"# {report.n_utterances} utterances, {len(report.failures)} failures", file=sys.stderr)
    return report.exit_code


def cmd_refine(args) -> int:
    cfg = _config(args)
    summary = run_refine(CorpusManifest.load(args.manifest), cfg, workers=args.workers, out_dir=cfg.out_dir)
    print(
        f"# refined {summary['n_ok']}/{summary['n_utterances']} utterances in {summary['wall_time_s']} s -> {cfg.out_dir}",
        file=sys.stderr,
    )
    for f in summary["failures"]:
        print(f"{f['utt_id']}\t{f['error']}")
    return EXIT_OK if summary["n_failed"] == 0 else EXIT_MISMATCH


def cmd_gd(args) -> int:
    cfg = _config(args)
    hybrid = cfg.hybrid()
    w = load_wav(args.wav, cfg.target_sample_rate or None)
    tau = min_phase_group_delay(short_term_energy(w, hybrid.frame_spec), hybrid.gd)
    gd = detect_syllable_boundaries(tau, hybrid.gd)
    buf = io.StringIO()
    buf.write("frame,time_s,tau\n")
    for m, (t, v) in enumerate(zip(tau.times(), tau.values)):
        buf.write(f"{m},{t:.6f},{v:.9g}\n")
    for t in gd.boundary_times_s:
        buf.write(f"# boundary,{t:.6f}\n")
    _write(args.out, buf.getvalue())
    return EXIT_OK


def cmd_sbsf(args) -> int:
    cfg = _config(args)
    hybrid = cfg.hybrid()
    w = load_wav(args.wav, cfg.target_sample_rate or None)
    band = hybrid.sbsf.high_band if args.band == "high" else hybrid.sbsf.low_band
    if args.low_hz is not None or args.high_hz is not None:
        band = BandSpec(
            args.low_hz if args.low_hz is not None else band.low_hz,
            args.high_hz if args.high_hz is not None else band.high_hz,
            "custom",
        )
    flux = subband_spectral_flux(w, hybrid.frame_spec, hybrid.n_fft, band, hybrid.sbsf.smoothing_hz)
    buf = io.StringIO()
    buf.write(
        f"# band={band.name} low_hz={band.low_hz:g} high_hz={band.high_hz:g} "
        f"sample_rate={w.sample_rate} smoothing_hz={hybrid.sbsf.smoothing_hz:g}\n"
    )
    buf.write("frame,time_s,flux\n")
    for m, (t, v) in enumerate(zip(flux.times(), flux.values)):
        buf.write(f"{m},{t:.6f},{v:.9g}\n")
    _write(args.out, buf.getvalue())
    return EXIT_OK


def cmd_export_durations(args) -> int:
    cfg = _config(args)
    lines = []
    for lab in args.lab:
        tier = parse_label_file(Path(lab).read_text(encoding="utf-8"), cfg.time_unit)
        if args.total_frames is not None:
            total, hop_s = args.total_frames, cfg.hop_s
        elif args.wav:
            w = load_wav(args.wav, cfg.target_sample_rate or None)
            total = cfg.total_frames(w)
            hop_s = cfg.hybrid().frame_spec.hop(w.sample_rate) / w.sample_rate
        else:
            total, hop_s = int(round(tier.end_s / cfg.hop_s)), cfg.hop_s
        utt = args.utt_id or Path(lab).stem
        lines.append(export_durations(tier, hop_s, total).to_line(utt) + "\n")
    _write(args.out, "".join(lines))
    return EXIT_OK


def _pair_files(ref_dir, hyp_dir, suffix):
    ref = {p.stem: p for p in sorted(Path(ref_dir).glob(f"*{suffix}"))}
    hyp = {p.stem: p for p in sorted(Path(hyp_dir).glob(f"*{suffix}"))}
    return [(u, ref[u], hyp[u]) for u in sorted(ref) if u in hyp]


def _pvalues(per_system: list, seed: int) -> dict:
    pvals = {}
    for i in range(len(per_system)):
        for j in range(i + 1, len(per_system)):
            a_name, a = per_system[i]
            b_name, b = per_system[j]
            common = sorted(set(a) & set(b))
            if common:
                p = paired_permutation_test([a[u] for u in common], [b[u] for u in common], seed=seed)
                pvals[f"{a_name} vs {b_name}"] = p
    return pvals


def cmd_eval_boundaries(args) -> int:
    cfg = _config(args)
    out_dir = Path(cfg.out_dir)
    status = EXIT_OK
    systems = []
    summary = {"systems": {}}
    for hyp_dir in args.hyp_dir:
        name = Path(hyp_dir).name
        rows, pooled, per_utt = [], [], {}
        for utt, ref_path, hyp_path in _pair_files(args.ref_dir, hyp_dir, ".lab"):
            ref = parse_label_file(ref_path.read_text(encoding="utf-8"), cfg.time_unit)
            hyp = parse_label_file(hyp_path.read_text(encoding="utf-8"), cfg.time_unit)
            try:
                rep = boundary_diff(ref, hyp)
            except TierMismatchError as exc:
                print(f"{name}/{utt}\t{exc}", file=sys.stderr)
                status = EXIT_MISMATCH
                continue
            pooled.extend(rep.diffs_ms)
            per_utt[utt] = rep.mean_abs_ms
            rows.append([utt, f"{rep.mean_abs_ms:.4f}", f"{rep.median_abs_ms:.4f}", rep.n_boundaries]
                        + [f"{rep.pct_within[t]:.4f}" for t in sorted(rep.pct_within)])
        agg = summarize_diffs(pooled)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["utt_id", "mean_abs_ms", "median_abs_ms", "n_boundaries"] + [f"pct_within_{t:g}ms" for t in sorted(agg.pct_within)])
        writer.writerows(rows)
        _write(out_dir / f"boundaries_{name}.csv", buf.getvalue())
        summary["systems"][name] = {
            "n_utterances": len(rows),
            "n_boundaries": agg.n_boundaries,
            "mean_abs_ms": agg.mean_abs_ms,
            "median_abs_ms": agg.median_abs_ms,
            "pct_within": {f"{t:g}": v for t, v in agg.pct_within.items()},
        }
        systems.append((name, per_utt))
    summary["permutation_p_values"] = _pvalues(systems, cfg.seed)
    _write(out_dir / "boundaries_summary.json", json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return status


def cmd_eval_mcd(args) -> int:
    cfg = _config(args)
    spec = cfg.hybrid().frame_spec
    out_dir = Path(cfg.out_dir)
    systems = []
    summary = {"systems": {}, "convention": "c1..cD, (10/ln10)*sqrt(2), mean over DTW path"}
    for syn_dir in args.syn_dir:
        name = Path(syn_dir).name
        scores = {}
        for utt, ref_path, syn_path in _pair_files(args.ref_dir, syn_dir, ".wav"):
            ref = load_wav(ref_path, cfg.target_sample_rate or None)
            syn = load_wav(syn_path, cfg.target_sample_rate or None)
            c_ref = mel_cepstra(ref, spec, cfg.n_fft, args.n_mels, args.order)
            c_syn = mel_cepstra(syn, spec, cfg.n_fft, args.n_mels, args.order)
            scores[utt] = mcd(c_ref, c_syn).mcd_db
        buf = io.StringIO()
        buf.write("utt_id,mcd_db\n")
        for utt, v in scores.items():
            buf.write(f"{utt},{v:.4f}\n")
        _write(out_dir / f"mcd_{name}.csv", buf.getvalue())
        summary["systems"][name] = {
            "n_utterances": len(scores),
            "mean_mcd_db": float(np.mean(list(scores.values()))) if scores else None,
        }
        systems.append((name, scores))
    summary["permutation_p_values"] = _pvalues(systems, cfg.seed)
    _write(out_dir / "mcd_summary.json", json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_viz(args) -> int:
    cfg = _config(args)
    hybrid = cfg.hybrid()
    w = load_wav(args.wav, cfg.target_sample_rate or None)
    tiers = {}
    for item in args.tier:
        name, eq, path = item.partition("=")
        if not eq:
            name, path = Path(item).stem, item
        tiers[name] = parse_label_file(Path(path).read_text(encoding="utf-8"), cfg.time_unit)
    _write(args.out, render_alignment_svg(w, tiers, hybrid.frame_spec, hybrid.n_fft, width=args.width))
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = _config(args) if not args.dump_defaults else ToolConfig()
    sys.stdout.write(cfg.dumps())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--time-unit", choices=("htk_100ns", "seconds"))
    common.add_argument("--out-dir")
    common.add_argument("--seed", type=int, help="seed for the permutation test")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hybridseg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a corpus before refinement")
    s.add_argument("--manifest", required=True)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("refine", parents=[common], help="hybrid segmentation + duration export for a corpus")
    s.add_argument("--manifest", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("gd", parents=[common], help="dump the group delay contour and boundaries as CSV")
    s.add_argument("wav")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_gd)

    s = sub.add_parser("sbsf", parents=[common], help="dump sub-band spectral flux as CSV")
    s.add_argument("wav")
    s.add_argument("--band", choices=("high", "low"), default="high")
    s.add_argument("--low-hz", type=float)
    s.add_argument("--high-hz", type=float)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_sbsf)

    s = sub.add_parser("export-durations", parents=[common], help="label files -> duration target lines")
    s.add_argument("lab", nargs="+")
    s.add_argument("--wav", help="audio whose frame count sets the budget")
    s.add_argument("--total-frames", type=int)
    s.add_argument("--utt-id")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_export_durations)

    s = sub.add_parser("eval-boundaries", parents=[common], help="boundary differences against reference labels")
    s.add_argument("--ref-dir", required=True)
    s.add_argument("--hyp-dir", required=True, action="append")
    s.set_defaults(func=cmd_eval_boundaries)

    s = sub.add_parser("eval-mcd", parents=[common], help="DTW mel-cepstral distortion against reference audio")
    s.add_argument("--ref-dir", required=True)
    s.add_argument("--syn-dir", required=True, action="append")
    s.add_argument("--n-mels", type=int, default=40)
    s.add_argument("--order", type=int, default=24)
    s.set_defaults(func=cmd_eval_mcd)

    s = sub.add_parser("viz", parents=[common], help="render tiers, spectrogram and waveform to SVG")
    s.add_argument("wav")
    s.add_argument("--tier", action="append", required=True, metavar="NAME=LAB")
    s.add_argument("--width", type=int, default=1200)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_viz)

    s = sub.add_parser("config", parents=[common], help="print the effective configuration")
    s.add_argument("--dump-defaults", action="store_true")
    s.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, WavFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
