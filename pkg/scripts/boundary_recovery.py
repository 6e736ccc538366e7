"""Boundary recovery on synthetic utterances, broken down by phone-class transition.

Each utterance's true tier is jittered by up to ``--max-shift-ms``; the script
reports mean absolute boundary error for the jittered input and for the GD,
SBSF and combined refinements.
"""

import argparse
import json
from collections import defaultdict

import numpy as np

from hybridseg.alignment import PhoneClassTable, classify
from hybridseg.pipeline import HybridConfig, hybrid_segment
from hybridseg.synth import perturb, random_utterance

SYSTEMS = {
    "gd_only": HybridConfig(use_sbsf=False),
    "sbsf_only": HybridConfig(use_gd=False),
    "hybrid": HybridConfig(),
}


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-n", "--n-utterances", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-shift-ms", type=float, default=30.0)
    p.add_argument("--json", help="also write the table as JSON here")
    args = p.parse_args()

    table = PhoneClassTable.default()
    rng = np.random.default_rng(args.seed)
    errors = defaultdict(lambda: defaultdict(list))  # system -> transition -> ms
    for _ in range(args.n_utterances):
        u = random_utterance(rng)
        initial = perturb(u.truth, rng, args.max_shift_ms / 1000)
        truth = np.array(u.truth.internal_boundaries())
        classes = [classify(s, table) for s in u.truth.symbols]
        labels = [f"{a}>{b}" for a, b in zip(classes, classes[1:])]
        outs = {"initial": initial}
        outs.update({name: hybrid_segment(u.waveform, initial, table, cfg) for name, cfg in SYSTEMS.items()})
        for name, tier in outs.items():
            diffs = 1000 * np.abs(np.array(tier.internal_boundaries()) - truth)
            for label, d in zip(labels, diffs):
                errors[name][label].append(d)
                errors[name]["ALL"].append(d)

    names = list(errors)
    transitions = ["ALL"] + sorted(t for t in errors["initial"] if t != "ALL")
    print(f"{'transition':<28}{'n':>6}" + "".join(f"{n:>11}" for n in names))
    result = {}
    for t in transitions:
        row = {n: float(np.mean(errors[n][t])) for n in names}
        result[t] = {"n": len(errors["initial"][t]), **row}
        print(f"{t:<28}{len(errors['initial'][t]):>6}" + "".join(f"{row[n]:>11.2f}" for n in names))
    overall = result["ALL"]
    print(f"\nhybrid / initial error ratio: {overall['hybrid'] / overall['initial']:.3f}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(result, f, indent=2)


if __name__ == "__main__":
    main()
