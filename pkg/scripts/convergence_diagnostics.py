#!/usr/bin/env python3
"""Train a dictionary on random low-rank patches and dump the descent diagnostics.

Writes ``steps.csv`` (one row per SGD step) and ``epochs.csv`` (epoch start
and end averages), both plot-ready, and prints a short summary.
"""

import argparse
import csv
import time
from pathlib import Path

import numpy as np

from hsc.coding import SccConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/convergence")
    ap.add_argument("-m", type=int, default=50)
    ap.add_argument("-t", type=int, default=100)
    ap.add_argument("-n", type=int, default=1000)
    ap.add_argument("--lam", type=float, default=None, help="default 1.2/sqrt(m)")
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--rank", type=int, default=8)
    ap.add_argument("--noise", type=float, default=0.3)
    ap.add_argument("--shuffle", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    lam = args.lam if args.lam is not None else 1.2 / np.sqrt(args.m)
    rng = np.random.default_rng(args.seed)
    X = rng.normal(size=(args.n, args.rank)) @ rng.normal(size=(args.rank, args.m))
    X += args.noise * rng.normal(size=X.shape)

    t0 = time.perf_counter()
    D, diag, codes = train(X, SccConfig(lam=lam, epochs=args.epochs, shuffle=args.shuffle, seed=args.seed),
                           n_atoms=args.t)
    elapsed = time.perf_counter() - t0

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    diag.write_csv(out / "steps.csv")
    start, end = diag.epoch_objectives()
    with open(out / "epochs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "start_avg", "end_avg"])
        for k, (s, e) in enumerate(zip(start, end), 1):
            w.writerow([k, repr(float(s)), repr(float(e))])

    s = diag.summary()
    nnz = np.mean([len(c.support) for c in codes])
    print(f"lambda={lam:.4f}  {len(diag)} steps in {elapsed:.2f}s  mean code support {nnz:.1f}/{args.t}")
    print(f"worst CD change {s['max_cd_increase']:.3g}, worst SGD change {s['max_sgd_increase']:.3g}, "
          f"worst epoch change {s['max_epoch_increase']:.3g}, max column norm^2 {s['max_col_norm_sq']:.12f}")
    for k, (a, b) in enumerate(zip(start, end), 1):
        print(f"epoch {k:2d}: start {a:.6f}  end {b:.6f}")


if __name__ == "__main__":
    main()
