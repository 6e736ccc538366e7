"""Vary one setting at a time and report boundary error on synthetic utterances."""

import argparse
from dataclasses import replace

import numpy as np

from hybridseg.alignment import PhoneClassTable
from hybridseg.dsp import FrameSpec
from hybridseg.groupdelay import GdConfig
from hybridseg.pipeline import HybridConfig, hybrid_segment
from hybridseg.sbsf import SbsfConfig
from hybridseg.synth import perturb, random_utterance


def variants():
    base = HybridConfig()
    yield "default", base
    yield "time_anchor=start", replace(base, frame_spec=FrameSpec(time_anchor="start"))
    for hz in (0.0, 125.0, 500.0):
        yield f"sbsf smoothing_hz={hz:g}", replace(base, sbsf=SbsfConfig(smoothing_hz=hz))
    for shift in (0.01, 0.03, 0.05):
        yield f"max_snap_shift_s={shift:g}", replace(base, max_snap_shift_s=shift)
    for wsf in (4.0, 12.0):
        yield f"gd wsf={wsf:g}", replace(base, gd=GdConfig(wsf=wsf))
    yield "gd lifter=rectangular", replace(base, gd=GdConfig(lifter="rectangular"))
    yield "gd only", replace(base, use_sbsf=False)
    yield "sbsf only", replace(base, use_gd=False)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("-n", "--n-utterances", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-shift-ms", type=float, default=30.0)
    args = p.parse_args()

    table = PhoneClassTable.default()
    rng = np.random.default_rng(args.seed)
    data = []
    for _ in range(args.n_utterances):
        u = random_utterance(rng)
        data.append((u, perturb(u.truth, rng, args.max_shift_ms / 1000)))

    def mean_error(tiers):
        d = [np.abs(np.array(t.internal_boundaries()) - u.truth.internal_boundaries()) for (u, _), t in zip(data, tiers)]
        return 1000 * float(np.mean(np.concatenate(d)))

    e0 = mean_error([initial for _, initial in data])
    print(f"{'variant':<28}{'mean ms':>9}{'ratio':>8}")
    print(f"{'initial':<28}{e0:>9.2f}{1.0:>8.3f}")
    for name, cfg in variants():
        e = mean_error([hybrid_segment(u.waveform, initial, table, cfg) for u, initial in data])
        print(f"{name:<28}{e:>9.2f}{e / e0:>8.3f}")


if __name__ == "__main__":
    main()
