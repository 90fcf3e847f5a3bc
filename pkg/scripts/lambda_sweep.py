"""Support recovery and coefficient error across STLSQ thresholds and noise seeds.

    python scripts/lambda_sweep.py --seeds 100-139 --thresholds 0.02,0.05,0.1,0.15,0.3,0.6

Use seeds other than 0-9 when tuning; those are reserved for acceptance.
"""

import argparse

import numpy as np

from glucosindy.pipeline import FitConfig, fit
from glucosindy.stlsq import StlsqConfig
from glucosindy.synth import SynthConfig, generate

TRUE_SUPPORT = {"1", "G", "I_act", "C_act"}


def seed_range(text):
    lo, _, hi = text.partition("-")
    return range(int(lo), int(hi or lo) + 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=seed_range, default=seed_range("100-119"))
    ap.add_argument("--thresholds", default="0.02,0.05,0.1,0.15,0.3,0.6")
    ap.add_argument("--noise-sd", type=float, default=2.0)
    args = ap.parse_args()
    thresholds = [float(x) for x in args.thresholds.split(",")]

    datasets = [generate(SynthConfig(noise_sd=args.noise_sd, seed=s)) for s in args.seeds]
    print(f"noise_sd {args.noise_sd}, {len(datasets)} seeds {args.seeds.start}-{args.seeds.stop - 1}")
    print(f"{'lambda':>8} {'exact':>7} {'mean terms':>11} {'mean err':>9} {'max err':>8}")
    for lam in thresholds:
        exact, sizes, errs = 0, [], []
        for synth in datasets:
            model = fit(synth.dataset, FitConfig(stlsq=StlsqConfig(threshold=lam)))
            support = model.support[0]
            sizes.append(len(support))
            if support == TRUE_SUPPORT:
                exact += 1
                errs += [abs(model.coefficient(t) / synth.true_model.coefficient(t) - 1) for t in TRUE_SUPPORT]
        mean = f"{np.mean(errs):.2%}" if errs else "-"
        worst = f"{np.max(errs):.2%}" if errs else "-"
        print(f"{lam:8.3f} {exact:>3}/{len(datasets):<3} {np.mean(sizes):11.2f} {mean:>9} {worst:>8}")


if __name__ == "__main__":
    main()
