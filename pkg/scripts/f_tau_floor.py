"""Convergence speed and late error floor for several f_tau values."""
import argparse

import numpy as np

from pmgfourier.dualtime import DualTimeConfig, k_from_khat
from pmgfourier.pmg import build_hierarchy, iterate_cycles, preset_cycle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--f-tau", type=float, nargs="+", default=[1.0, 1.05, 1.1])
    ap.add_argument("--n-cycles", type=int, default=3000)
    args = ap.parse_args()

    cfg = DualTimeConfig(dt=0.07, dtau=7e-3)
    for khat in (np.pi / 8, np.pi / 16):
        k = k_from_khat(khat, 4, 1.0, cfg.dt)
        print(f"khat = pi/{np.pi / khat:.0f}")
        for ft in args.f_tau:
            hier = build_hierarchy(4, k, cfg, mu=0.5, f_tau=ft)
            for name in ("v1", "vap"):
                run = iterate_cycles(preset_cycle(name, 4, ft), hier, args.n_cycles)
                print(f"  f_tau={ft:<5g} {name:4s} tau(1e-4) = {run.tau_to_reach(1e-4):.4f}  "
                      f"floor err = {run.err[-1]:.3e}  floor err_exact = {run.err_exact[-1]:.6e}")


if __name__ == "__main__":
    main()
