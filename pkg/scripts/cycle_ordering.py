"""Fine pseudo time each cycle needs to reach a target iteration error."""
import argparse

import numpy as np

from pmgfourier.dualtime import DualTimeConfig, k_from_khat
from pmgfourier.pmg import build_hierarchy, iterate_cycles, preset_cycle, single_level


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=4)
    ap.add_argument("--mu", type=float, default=0.5)
    ap.add_argument("--target", type=float, default=1e-6)
    ap.add_argument("--f-tau", type=float, default=1.0)
    ap.add_argument("--cycles", nargs="+", default=["base", "v1", "v3", "vap", "w"])
    ap.add_argument("--n-cycles", type=int, default=3000)
    args = ap.parse_args()

    cfg = DualTimeConfig(dt=0.07, dtau=7e-3)
    for khat in (np.pi / 8, np.pi / 16):
        k = k_from_khat(khat, args.p, 1.0, cfg.dt)
        hier = build_hierarchy(args.p, k, cfg, mu=args.mu, f_tau=args.f_tau)
        print(f"khat = pi/{np.pi / khat:.0f}")
        for name in args.cycles:
            spec = single_level(args.p, 1) if name == "base" else \
                preset_cycle(name, args.p, args.f_tau)
            run = iterate_cycles(spec, hier, args.n_cycles)
            print(f"  {name:5s} tau = {run.tau_to_reach(args.target):.4f}  "
                  f"final err_exact = {run.err_exact[-1]:.3e}")


if __name__ == "__main__":
    main()
