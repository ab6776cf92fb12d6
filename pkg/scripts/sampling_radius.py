#!/usr/bin/env python3
"""Covering-radius curve of farthest-point sampling on the synthetic annulus.

Prints and writes (``radius.csv``) the set radius after each center, the
radius about the newest center and the sampling phase, for plotting.
"""

import argparse
import csv
from pathlib import Path

from hsc.patches import SamplingConfig, fpsbs_trace
from hsc.synth import SynthConfig, base_mesh


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/sampling")
    ap.add_argument("-p", type=int, default=200)
    ap.add_argument("--stop-radius", type=float, default=0.1)
    ap.add_argument("--n-radial", type=int, default=12)
    ap.add_argument("--n-angular", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    surf = base_mesh(SynthConfig(n_radial=args.n_radial, n_angular=args.n_angular))
    trace = fpsbs_trace(surf, SamplingConfig(target_patch_count=args.p, stop_radius=args.stop_radius), args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "radius.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "center", "phase", "set_radius", "latest_radius"])
        for k, row in enumerate(zip(trace.centers, trace.phase, trace.set_radius, trace.latest_radius), 1):
            w.writerow([k, *row])
    n_cov = trace.phase.count("coverage")
    print(f"{surf.n_vertices} vertices, {len(trace.centers)} centers ({n_cov} added for coverage), "
          f"final set radius {trace.set_radius[-1]:.4f}, stopped by radius: {trace.stopped_by_radius}")


if __name__ == "__main__":
    main()
