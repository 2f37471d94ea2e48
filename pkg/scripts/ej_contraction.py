"""Element-Jacobi smoothing with and without p-multigrid over dt."""
import argparse
import os

import numpy as np

from pmgfourier.sweeps import default_jobs, sweep_ej_contraction, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, nargs="+", default=[3, 4])
    ap.add_argument("--kappa", type=float, default=0.5)
    ap.add_argument("--out", default="out/ej")
    ap.add_argument("--jobs", type=int, default=default_jobs())
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    for p in args.p:
        ds = sweep_ej_contraction(p, kappa=args.kappa, jobs=args.jobs)
        for dt, gb, gp, _ in ds.rows:
            print(f"p={p} dt={dt:9.4g}  EJ {gb:.4f}  EJ+pMG {gp:.4f}")
        write_csv(os.path.join(args.out, f"ej_p{p}.csv"), ds)


if __name__ == "__main__":
    main()
