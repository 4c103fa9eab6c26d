#!/usr/bin/env python3
"""Writes a mushrooms-shaped libsvm sample: 22 one-hot categorical
attributes (112 binary columns), labels in {1, 2}.

The labels follow a sparse logistic model over the one-hot columns so the
classification problem is learnable but not separable.
"""
import argparse

import numpy as np

CARDINALITIES = [6, 4, 10, 2, 9, 2, 2, 2, 12, 2, 4, 4, 4, 9, 9, 1, 4, 3, 5, 9, 6, 3]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=800)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("out")
    args = ap.parse_args()
    assert sum(CARDINALITIES) == 112

    rng = np.random.default_rng(args.seed)
    offsets = np.cumsum([0] + CARDINALITIES[:-1])
    weights = rng.normal(0.0, 1.5, size=112) * (rng.random(112) < 0.4)
    # Skewed category frequencies, like the real attributes.
    probs = [rng.dirichlet(np.full(c, 0.8)) for c in CARDINALITIES]

    rows = []
    for _ in range(args.rows):
        rows.append(sorted(int(off + rng.choice(len(p), p=p)) for off, p in zip(offsets, probs)))
    z = np.array([weights[cols].sum() for cols in rows]) + rng.normal(0.0, 0.5, size=len(rows))
    z -= np.median(z)

    with open(args.out, "w") as f:
        for cols, zi in zip(rows, z):
            label = 1 if rng.random() < 1.0 / (1.0 + np.exp(-zi)) else 2
            f.write(str(label) + " " + " ".join(f"{c + 1}:1" for c in cols) + "\n")

if __name__ == "__main__":
    main()
