"""Command-line front end.

Each subcommand resolves a :class:`~pmgfourier.config.RunConfig`, runs one
analysis, writes CSV into ``--out`` and echoes the resolved config. CSV
columns are listed in ``FORMATS.md``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import sweeps
from .config import ConfigError, preset_names, resolve
from .dualtime import (PseudoStepUnstable, build_propagators, discrete_error, k_from_khat)
from .fr_ops import DecompositionError, build_bloch, build_fr_operators
from .pmg import CycleSpecError
from .schemes import TableauError
from .timedomain import Diverged, Grid1D, bloch_history, build_time_hierarchy, dual_time_step

SUBCOMMANDS = {
    "operators": "dump FR matrices (and Q at space.k) as re/im CSV",
    "stability": "|amp| = 1 contours of the scalar dual-time amplification",
    "cfl": "maximum stable (pseudo) step sizes over a wavenumber sweep",
    "error": "fully discrete Bloch error against pseudo step",
    "contraction": "initial contraction of base vs multigrid smoothing",
    "modes": "primary/secondary mode energies per cycle",
    "cycle-run": "per-cycle error history of one or more cycles",
    "verify": "Fourier prediction vs time-domain solver",
}


class CheckFailed(RuntimeError):
    pass


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmgfourier", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, metavar="subcommand")
    for name, help_ in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("--config", help="JSON config with scheme/space/dualtime/cycle/sweep sections")
        sp.add_argument("--preset", help=f"checked-in config ({', '.join(preset_names())})")
        sp.add_argument("--out", default=".", help="output directory (default: .)")
        sp.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: logical cores)")
        sp.add_argument("--seed", type=int, default=0, help="seed for random draws")
        sp.add_argument("--p", type=int, help="override space.p")
        sp.add_argument("--mu", type=float, help="override space.mu")
        sp.add_argument("--dt", type=float, help="override dualtime.dt")
        sp.add_argument("--dtau", type=float, help="override dualtime.dtau")
        sp.add_argument("--bdf", type=int, help="override scheme.bdf")
        if name == "operators":
            sp.add_argument("--nodes", choices=["legendre"], help="solution points")
        if name in ("cycle-run", "modes", "contraction"):
            sp.add_argument("--cycle", help="cycle preset: base, v1, v3, vap, w")
            sp.add_argument("--f-tau", type=float, dest="f_tau", help="override cycle.f_tau")
    return ap


def _overrides(args) -> dict:
    ov = {}

    def put(sec, key, val):
        if val is not None:
            ov.setdefault(sec, {})[key] = val

    put("space", "p", args.p)
    put("space", "mu", args.mu)
    put("space", "nodes", getattr(args, "nodes", None))
    put("dualtime", "dt", args.dt)
    put("dualtime", "dtau", args.dtau)
    put("scheme", "bdf", args.bdf)
    cyc = getattr(args, "cycle", None)
    if cyc is not None:
        put("cycle", "name", cyc)
        put("cycle", "names", [cyc])
    put("cycle", "f_tau", getattr(args, "f_tau", None))
    return ov


def _khat_label(kh: float) -> str:
    return f"pi_{math.pi / kh:.6g}" if kh else "0"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_operators(cfg, args):
    sp = cfg.space
    base = build_fr_operators(sp.p, *sp.alpha)
    mats = {name: getattr(base, name) for name in
            ("D", "Cm", "C0", "Cp", "Bm2", "Bm", "B0", "Bp", "Bp2")}
    mats.update({"gL": base.gL[:, None], "gR": base.gR[:, None],
                 "lL": base.lL[None, :], "lR": base.lR[None, :], "x": base.x[:, None]})
    if sp.k is not None:
        op = build_bloch(base, sp.h, sp.mu, sp.k)
        mats.update({"Q": op.Q, "W": op.W})
    ds = sweeps.Dataset("operators", ["matrix", "row", "col", "re", "im"],
                        config={"p": sp.p, "alpha": sp.alpha, "mu": sp.mu, "h": sp.h,
                                "k": "none" if sp.k is None else sp.k})
    for name, M in mats.items():
        M = np.atleast_2d(M)
        for i in range(M.shape[0]):
            for j in range(M.shape[1]):
                z = complex(M[i, j])
                ds.rows.append([name, i, j, z.real, z.imag])
    return {"operators.csv": ds}


def cmd_stability(cfg, args):
    out = {}
    # a multi-valued sweep.dt_list gives one contour file per dt
    dts = cfg.sweep.dt_list if len(cfg.sweep.dt_list) > 1 else [cfg.dualtime.dt]
    for dt in dts:
        dc = cfg.dual_time(dt=dt)
        ds = sweeps.sweep_stability(dc, cfg.dualtime.m_list, x_range=tuple(cfg.sweep.x_range),
                                    y_range=tuple(cfg.sweep.y_range), n=cfg.sweep.n)
        out[f"stability_dt{dt:g}.csv" if len(dts) > 1 else "stability.csv"] = ds
    return out


def cmd_cfl(cfg, args):
    sw = cfg.sweep
    ds = sweeps.sweep_cfl(tuple(sw.orders), mode=sw.mode, mu_list=tuple(sw.mu_list),
                          dt_list=tuple(sw.dt_list), m_list=tuple(cfg.dualtime.m_list),
                          alpha=tuple(cfg.space.alpha), n_k=sw.n_k, bdf=cfg.scheme.bdf,
                          jobs=args.jobs)
    return {"cfl.csv": ds}


def cmd_error(cfg, args):
    ds = sweeps.sweep_error(cfg.space.p, cfg.dual_time(), cfg.sweep.khat, cfg.sweep.m_max,
                            mu=cfg.space.mu, alpha=tuple(cfg.space.alpha))
    return {"error.csv": ds}


def cmd_contraction(cfg, args):
    sp, sw = cfg.space, cfg.sweep
    if cfg.scheme.smoother == "ej":
        ds = sweeps.sweep_ej_contraction(sp.p, dt_list=sw.dt_list,
                                         k=sp.k if sp.k is not None else math.pi / 100,
                                         kappa=cfg.scheme.ej_kappa, mu=sp.mu,
                                         bdf=cfg.scheme.bdf, alpha=tuple(sp.alpha),
                                         cycle=cfg.cycle.name, jobs=args.jobs)
    else:
        ds = sweeps.sweep_contraction(sp.p, ratios=sw.ratios, bdf=cfg.scheme.bdf, mu=sp.mu,
                                      alpha=tuple(sp.alpha), cycle=cfg.cycle.name,
                                      dtau_factor=sw.dtau_factor, k=sp.k, jobs=args.jobs)
    print(f"argmax benefit at {ds.markers['argmax_x']:.6g} "
          f"(benefit {ds.markers['max_benefit']:.6g})")
    return {"contraction.csv": ds}


def _cycles(cfg, columns):
    out = {}
    for kh in cfg.sweep.khat:
        ds = sweeps.sweep_cycles(cfg.space.p, cfg.dual_time(), kh, tuple(cfg.cycle.names),
                                 n_cycles=cfg.cycle.n_cycles, mu=cfg.space.mu,
                                 alpha=tuple(cfg.space.alpha), f_tau=cfg.cycle.f_tau)
        if columns != ds.columns:
            idx = [ds.columns.index(c) for c in columns]
            ds.rows = [[r[i] for i in idx] for r in ds.rows]
            ds.columns = list(columns)
        out[kh] = ds
    return out


def cmd_cycle_run(cfg, args):
    runs = _cycles(cfg, ["cycle", "n", "tau", "err", "err_exact", "beta0", "beta1"])
    single = len(runs) == 1
    return {("cycle_run.csv" if single else f"cycle_run_{_khat_label(kh)}.csv"): ds
            for kh, ds in runs.items()}


def cmd_modes(cfg, args):
    runs = _cycles(cfg, ["cycle", "n", "tau", "beta0", "beta1"])
    single = len(runs) == 1
    return {("modes.csv" if single else f"modes_{_khat_label(kh)}.csv"): ds
            for kh, ds in runs.items()}


def verify_point(p, khat, mu, dc, m_max, alpha=(1.0, 0.5)):
    """Max relative deviation of time-domain vs analytic error over ``m <= m_max``."""
    base = build_fr_operators(p, *alpha)
    k = k_from_khat(khat, p, 1.0, dc.dt)
    op = build_bloch(base, 1.0, mu, k)
    grid = Grid1D.for_wavenumber(k)
    hier = build_time_hierarchy(p, grid, dc, mu=mu, alpha=alpha, l_min=p)
    hist = bloch_history(grid, base, k, op.omega, dc.dt, len(dc.bdf.history))
    ref = np.exp(-1j * op.omega * dc.dt) * hist[0]
    res = dual_time_step(hier, hist, n_iter=m_max, reference=ref, error_element=0)
    pred = np.array([discrete_error(build_propagators(op, dc, M=m, check=False), op)[1]
                     for m in range(m_max + 1)])
    got = np.array(res.error_norms)
    return got, pred, float(np.max(np.abs(got - pred) / pred))


def cmd_verify(cfg, args):
    dc = cfg.dual_time()
    ds = sweeps.Dataset("verify", ["p", "khat", "mu", "m", "err_time", "err_fourier"],
                        config={"dt": dc.dt, "dtau": dc.dtau, "bdf": dc.bdf.order,
                                "alpha": cfg.space.alpha, "seed": args.seed})
    points = [(cfg.space.p, kh, cfg.space.mu) for kh in cfg.sweep.khat]
    rng = np.random.default_rng(args.seed)
    for _ in range(cfg.sweep.random_draws):
        points.append((int(rng.integers(1, 6)), float(np.pi / rng.choice([4, 8, 16])),
                       float(rng.uniform(0.0, 0.5))))
    worst = 0.0
    for p, kh, mu in points:
        got, pred, dev = verify_point(p, kh, mu, dc, cfg.sweep.m_max, tuple(cfg.space.alpha))
        worst = max(worst, dev)
        for m, (a, b) in enumerate(zip(got, pred)):
            ds.rows.append([p, kh, mu, m, a, b])
    ds.markers = {"max_rel_deviation": worst}
    print(f"max relative deviation: {worst:.3e}")
    if not worst <= 1e-8:
        raise CheckFailed(f"time-domain and Fourier errors differ by {worst:.3e} > 1e-8")
    return {"verify.csv": ds}


HANDLERS = {
    "operators": cmd_operators, "stability": cmd_stability, "cfl": cmd_cfl,
    "error": cmd_error, "contraction": cmd_contraction, "modes": cmd_modes,
    "cycle-run": cmd_cycle_run, "verify": cmd_verify,
}


def main(argv=None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    if args.jobs is None:
        args.jobs = sweeps.default_jobs()
    try:
        cfg = resolve(args.preset, args.config, _overrides(args))
        print(json.dumps(cfg.to_dict(), sort_keys=True))
        os.makedirs(args.out, exist_ok=True)
        outputs = HANDLERS[args.command](cfg, args)
        with open(os.path.join(args.out, "config.json"), "w") as fh:
            json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        for fname, ds in outputs.items():
            path = os.path.join(args.out, fname)
            sweeps.write_csv(path, ds)
            print(f"wrote {path} ({len(ds.rows)} rows)", file=sys.stderr)
    except (ConfigError, TableauError, CycleSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, PseudoStepUnstable, DecompositionError, Diverged, CheckFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
