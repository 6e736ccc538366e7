"""Write a synthetic corpus (wav, perturbed labels, true labels, manifest) for the CLI."""

import argparse

from hybridseg.synth import write_corpus


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("out_dir")
    p.add_argument("-n", "--n-utterances", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--max-shift-ms", type=float, default=30.0)
    args = p.parse_args()
    path = write_corpus(args.out_dir, args.n_utterances, args.seed, args.sample_rate, args.max_shift_ms / 1000.0)
    print(f"wrote {args.n_utterances} utterances; manifest at {path}")


if __name__ == "__main__":
    main()
