"""Cross-validated train/test log-likelihood curves over K, several seeds.

    python3 scripts/cv_curves.py --seeds 5 --kmax 25
"""

import argparse

import numpy as np

from ggs import SyntheticSpec, cross_validate, generate_synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--kmax", type=int, default=25)
    ap.add_argument("--lambdas", default="1e-3,1,10,1e3")
    ap.add_argument("--folds", type=int, default=10)
    args = ap.parse_args()
    lambdas = [float(v) for v in args.lambdas.split(",")]

    chosen = []
    for seed in range(args.seeds):
        ds, _, _ = generate_synthetic(SyntheticSpec(seed=seed))
        rep = cross_validate(ds.ts, args.kmax, lambdas, folds=args.folds, seed=seed)
        lam, k = rep.chosen
        chosen.append(k)
        rows = [a for a in rep.aggregates if a["lambda"] == lam]
        curve = " ".join(f"{a['K']}:{a['test_mean']:.2f}" for a in rows)
        print(f"seed={seed} chosen K={k} lambda={lam:g}")
        print(f"  test ll by K: {curve}")
    ks, counts = np.unique(chosen, return_counts=True)
    print("chosen K counts:", {int(k): int(c) for k, c in zip(ks, counts)})


if __name__ == "__main__":
    main()
