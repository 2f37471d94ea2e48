"""Primary and secondary mode weights over the first few cycles."""
import argparse

import numpy as np

from pmgfourier.dualtime import DualTimeConfig, k_from_khat
from pmgfourier.pmg import build_hierarchy, iterate_cycles, preset_cycle, single_level


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=4)
    ap.add_argument("--khat", type=float, default=np.pi / 16)
    ap.add_argument("--mu", type=float, default=0.5)
    ap.add_argument("--n-cycles", type=int, default=6)
    args = ap.parse_args()

    cfg = DualTimeConfig(dt=0.07, dtau=7e-3)
    hier = build_hierarchy(args.p, k_from_khat(args.khat, args.p, 1.0, cfg.dt), cfg, mu=args.mu)
    np.set_printoptions(precision=4, linewidth=120)
    for name in ("base", "v1", "v3", "vap"):
        spec = single_level(args.p, 2) if name == "base" else preset_cycle(name, args.p)
        run = iterate_cycles(spec, hier, args.n_cycles)
        print(f"{name:5s} primary   {run.primary}")
        print(f"{'':5s} secondary {run.secondary}")


if __name__ == "__main__":
    main()
