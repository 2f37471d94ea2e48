"""Base vs multigrid initial contraction over dt/dtau, for BDF2 and BDF3."""
import argparse
import os

import numpy as np

from pmgfourier.sweeps import default_jobs, sweep_contraction, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, nargs="+", default=[3, 4])
    ap.add_argument("--cycle", default="vap")
    ap.add_argument("--mu", type=float, default=0.1)
    ap.add_argument("--n", type=int, default=60, help="number of dt/dtau samples")
    ap.add_argument("--out", default="out/contraction")
    ap.add_argument("--jobs", type=int, default=default_jobs())
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    ratios = np.geomspace(1.2, 2000, args.n)
    for p in args.p:
        for bdf in (2, 3):
            ds = sweep_contraction(p, ratios=ratios, bdf=bdf, mu=args.mu, cycle=args.cycle,
                                   jobs=args.jobs)
            rel = ds.column("gamma_pmg") / ds.column("gamma_base")
            print(f"p={p} BDF{bdf}: argmax dt/dtau {ds.markers['argmax_x']:.3g}, "
                  f"min gamma ratio {rel.min():.4f}, at largest ratio {rel[-1]:.4f}")
            write_csv(os.path.join(args.out, f"contraction_p{p}_bdf{bdf}.csv"), ds)


if __name__ == "__main__":
    main()
