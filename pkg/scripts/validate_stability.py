"""Check predicted dtau_max against the time-domain solver on random draws."""
import argparse

import numpy as np

from pmgfourier.dualtime import DualTimeConfig, NoStableStep, dtau_max, make_k_sweep, nyquist
from pmgfourier.fr_ops import build_bloch, build_fr_operators
from pmgfourier.schemes import make_bdf
from pmgfourier.timedomain import Diverged, Grid1D, build_time_hierarchy, dual_time_step


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--draws", type=int, default=10)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--steps", type=int, default=500)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    grid = Grid1D(32)
    done = 0
    while done < args.draws:
        p = int(rng.integers(1, 6))
        mu = float(rng.choice([0.0, rng.uniform(0, 0.2)]))
        bdf = int(rng.integers(1, 4))
        dt = float(rng.uniform(0.5, 5.0))
        base = build_fr_operators(p)
        ops = [build_bloch(base, 1.0, mu, k)
               for k in make_k_sweep(nyquist(p, 1.0)[0], 128, "linear")]
        cfg = DualTimeConfig(dt=dt, dtau=1e-3, M=args.steps, bdf=make_bdf(bdf))
        try:
            dmax = dtau_max(ops, cfg, "coupled")
        except NoStableStep:
            print(f"p={p} mu={mu:.3f} BDF{bdf} dt={dt:.2f}: no stable pseudo step, skipped")
            continue
        line = []
        for factor in (0.95, 1.05):
            hier = build_time_hierarchy(p, grid, cfg.with_(dtau=factor * dmax), mu=mu, l_min=p)
            u0 = rng.standard_normal((grid.N, p + 1))
            try:
                dual_time_step(hier, [u0] * bdf, n_iter=args.steps)
                line.append(f"{factor}: bounded")
            except Diverged as exc:
                line.append(f"{factor}: diverged at {exc.step}")
        print(f"p={p} mu={mu:.3f} BDF{bdf} dt={dt:.2f} dtau_max={dmax:.4g}  " + ", ".join(line))
        done += 1


if __name__ == "__main__":
    main()
