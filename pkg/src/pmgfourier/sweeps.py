"""Parameter sweeps that regenerate the data behind each analysis figure.

Every sweep returns a :class:`Dataset` (config echo, column names, rows) and
is a pure function of its arguments, so rerunning a config reproduces the
CSV byte for byte. Worker pools only change wall time, never row order.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import contourpy
import numpy as np

from .dualtime import (DualTimeConfig, build_propagators, discrete_error, dtau_max,
                       k_from_khat, make_k_sweep, nyquist, scalar_amplification)
from .fr_ops import build_bloch, build_fr_operators
from .pmg import (build_hierarchy, initial_contraction, iterate_cycles, preset_cycle,
                  single_level)
from .schemes import make_bdf


@dataclass
class Dataset:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    markers: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, ds: Dataset) -> None:
    """``# key=value`` config echo, then a header row and the data rows."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# sweep={ds.name}\n")
        for key, val in ds.config.items():
            fh.write(f"# {key}={_fmt(val) if not isinstance(val, (list, tuple)) else ' '.join(map(_fmt, val))}\n")
        for key, val in ds.markers.items():
            fh.write(f"# marker.{key}={_fmt(val)}\n")
        fh.write(",".join(ds.columns) + "\n")
        for row in ds.rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _pmap(fn, items, jobs: int | None):
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# stability contours
# ---------------------------------------------------------------------------

def sweep_stability(cfg: DualTimeConfig, m_list=(1, 10), *, x_range=(-6.0, 1.0),
                    y_range=(-5.0, 5.0), n=401, include_erk: bool = True) -> Dataset:
    """``|amp| = 1`` contours of the scalar M-step amplification over ``lambda``.

    ``m="erk"`` rows hold the uncoupled ``|R(lambda dtau)| = 1`` reference.
    """
    nx, ny = (n, n) if np.isscalar(n) else n
    x = np.linspace(*x_range, nx)
    y = np.linspace(*y_range, ny)
    lam = x[None, :] + 1j * y[:, None]
    fields = [(m, np.abs(scalar_amplification(lam, cfg, M=int(m)))) for m in m_list]
    if include_erk:
        fields.append(("erk", np.abs(cfg.tab.stability_function(lam * cfg.dtau))))
    ds = Dataset("stability", ["m", "line", "lam_x", "lam_y"],
                 config={"dt": cfg.dt, "dtau": cfg.dtau, "bdf": cfg.bdf.order,
                         "tableau": cfg.tab.name, "x_range": x_range, "y_range": y_range,
                         "n": nx})
    for m, z in fields:
        lines = contourpy.contour_generator(x, y, z).lines(1.0)
        if not lines:
            warnings.warn(f"no |amp| = 1 contour for m={m} in the scanned window")
        for li, seg in enumerate(lines):
            for px, py in seg:
                ds.rows.append([m, li, px, py])
    return ds


def real_axis_limit(cfg: DualTimeConfig, M: int | None = None, lo: float = -50.0,
                    n: int = 20001) -> float:
    """Most negative ``lambda`` on the real axis reached from 0 with ``|amp| <= 1``."""
    lam = np.linspace(0.0, lo, n)[1:]
    amp = np.abs(scalar_amplification(lam, cfg, M=M)) if M is not None else \
        np.abs(cfg.tab.stability_function(lam * cfg.dtau))
    bad = np.nonzero(amp > 1.0 + 1e-12)[0]
    return float(lam[bad[0] - 1]) if bad.size and bad[0] > 0 else float(lam[-1])


# ---------------------------------------------------------------------------
# CFL curves
# ---------------------------------------------------------------------------

def _cfl_point(args):
    p, mu, dt, m, mode, alpha, n_k, bdf = args
    base = build_fr_operators(p, *alpha)
    kNq, _ = nyquist(p, 1.0, dt if mode == "coupled" else None)
    ops = [build_bloch(base, 1.0, mu, k) for k in make_k_sweep(kNq, n_k)]
    cfg = DualTimeConfig(dt=dt, dtau=min(1e-9, 0.5 * dt), M=m, bdf=make_bdf(bdf))
    return dtau_max(ops, cfg, mode)


def sweep_cfl(orders=(1, 2, 3, 4), *, mode: str = "explicit", mu_list=(0.0,),
              dt_list=(1.0,), m_list=(1,), alpha=(1.0, 0.5), n_k: int = 64,
              bdf: int = 2, jobs: int | None = None) -> Dataset:
    """Maximum stable (pseudo) step over ``k in (0, k_Nq]``.

    ``mode="explicit"``: plain ERK limit per ``(p, mu)``; ``dt`` only sets the
    (irrelevant) physical step. ``mode="coupled"``: the dual-time set per
    ``(p, m, dt)`` with ``k_Nq`` including the temporal limit.
    """
    if mode not in ("explicit", "coupled"):
        raise ValueError(f"mode must be explicit or coupled, got {mode!r}")
    if mode == "explicit":
        grid = [(p, mu, 1e3, 1, mode, alpha, n_k, bdf) for p in orders for mu in mu_list]
    else:
        grid = [(p, mu, dt, m, mode, alpha, n_k, bdf) for p in orders for mu in mu_list
                for m in m_list for dt in dt_list]
    vals = _pmap(_cfl_point, grid, jobs)
    ds = Dataset("cfl", ["p", "mu", "m", "dt", "dtau_max"],
                 config={"mode": mode, "alpha": alpha, "n_k": n_k, "bdf": bdf})
    for g, v in zip(grid, vals):
        p, mu, dt, m = g[:4]
        ds.rows.append([p, mu, m, dt if mode == "coupled" else math.nan, v])
    return ds


def dtau_max_advection(p: int, alpha=(1.0, 0.5), n_k: int = 64) -> float:
    """Explicit pure-advection limit ``dtau_max,A``."""
    return _cfl_point((p, 0.0, 1e3, 1, "explicit", alpha, n_k, 2))


# ---------------------------------------------------------------------------
# error histories
# ---------------------------------------------------------------------------

def sweep_error(p: int, cfg: DualTimeConfig, khats, m_max: int, *, mu: float = 0.0,
                alpha=(1.0, 0.5)) -> Dataset:
    """``||e||`` of the fully discrete Bloch error against pseudo step ``m``."""
    base = build_fr_operators(p, *alpha)
    ds = Dataset("error", ["khat", "m", "err"],
                 config={"p": p, "dt": cfg.dt, "dtau": cfg.dtau, "mu": mu,
                         "bdf": cfg.bdf.order, "alpha": alpha})
    for kh in khats:
        op = build_bloch(base, 1.0, mu, k_from_khat(kh, p, 1.0, cfg.dt))
        for m in range(m_max + 1):
            props = build_propagators(op, cfg, M=m, check=False)
            ds.rows.append([kh, m, discrete_error(props, op)[1]])
    return ds


# ---------------------------------------------------------------------------
# contraction maps
# ---------------------------------------------------------------------------

def _contraction_point(args):
    p, k, dtau, ratio, bdf, mu, alpha, cycle, smoother, kappa = args
    cfg = DualTimeConfig(dt=ratio * dtau, dtau=dtau, bdf=make_bdf(bdf))
    hier = build_hierarchy(p, k, cfg, mu=mu, alpha=alpha, smoother=smoother, ej_kappa=kappa)
    spec = preset_cycle(cycle, p)
    g_pmg = initial_contraction(spec, hier)
    g_base = initial_contraction(single_level(p, spec.fine_steps), hier)
    return g_base, g_pmg


def _benefit_markers(x, benefit):
    i = int(np.argmax(benefit))
    return {"argmax_x": float(x[i]), "max_benefit": float(benefit[i]),
            "interior": bool(0 < i < len(x) - 1)}


def sweep_contraction(p: int = 4, *, ratios=None, bdf: int = 2, mu: float = 0.1,
                      alpha=(1.0, 0.5), cycle: str = "vap", dtau_factor: float = 0.078,
                      k: float | None = None, jobs: int | None = None) -> Dataset:
    """Initial contraction of base vs multigrid over ``dt/dtau``.

    Defaults: ``k = (p+1) pi / 16`` and ``dtau = dtau_factor * dtau_max,A``.
    The base scheme takes as many fine steps per cycle as the multigrid cycle.
    """
    ratios = default_ratios() if ratios is None else np.asarray(ratios, dtype=float)
    k = (p + 1) * np.pi / 16 if k is None else k
    dA = dtau_max_advection(p, alpha)
    dtau = dtau_factor * dA
    grid = [(p, k, dtau, float(r), bdf, mu, alpha, cycle, "erk", 0.0) for r in ratios]
    vals = _pmap(_contraction_point, grid, jobs)
    ds = Dataset("contraction", ["ratio", "gamma_base", "gamma_pmg", "benefit"],
                 config={"p": p, "k": k, "bdf": bdf, "mu": mu, "alpha": alpha,
                         "cycle": cycle, "dtau_factor": dtau_factor,
                         "dtau_max_A": dA, "dtau": dtau})
    for r, (gb, gp) in zip(ratios, vals):
        ds.rows.append([float(r), gb, gp, gb / gp])
    ds.markers = _benefit_markers(ratios, ds.column("benefit"))
    return ds


def default_ratios(n: int = 60, lo: float = 1.2, hi: float = 2000.0) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def sweep_ej_contraction(p: int = 3, *, dt_list=None, k: float = np.pi / 100,
                         kappa: float = 0.5, mu: float = 0.1, bdf: int = 2,
                         alpha=(1.0, 0.5), cycle: str = "v1",
                         jobs: int | None = None) -> Dataset:
    """Element-Jacobi smoother with and without multigrid over ``dt``."""
    dt_list = np.geomspace(1e-3, 10.0, 25) if dt_list is None else np.asarray(dt_list, float)
    # EJ ignores dtau; any value below dt satisfies the config invariant
    grid = [(p, k, 1e-3 * dt, 1e3, bdf, mu, alpha, cycle, "ej", kappa) for dt in dt_list]
    vals = _pmap(_contraction_point, grid, jobs)
    ds = Dataset("ej_contraction", ["dt", "gamma_base", "gamma_pmg", "benefit"],
                 config={"p": p, "k": k, "kappa": kappa, "mu": mu, "bdf": bdf,
                         "alpha": alpha, "cycle": cycle})
    for dt, (gb, gp) in zip(dt_list, vals):
        ds.rows.append([float(dt), gb, gp, gb / gp])
    ds.markers = _benefit_markers(dt_list, ds.column("benefit"))
    return ds


# ---------------------------------------------------------------------------
# cycle histories and mode energies
# ---------------------------------------------------------------------------

def sweep_cycles(p: int, cfg: DualTimeConfig, khat: float, cycles=("base", "v1", "v3", "vap"),
                 *, n_cycles: int = 200, mu: float = 0.5, alpha=(1.0, 0.5),
                 f_tau: float = 1.0) -> Dataset:
    """Per-cycle ``(tau, ||e||, ||e_exact||, |beta_0|, |beta_1|)`` for each cycle.

    ``base`` is plain dual-time stepping, one pseudo step per row.
    """
    k = k_from_khat(khat, p, 1.0, cfg.dt)
    hier = build_hierarchy(p, k, cfg, mu=mu, alpha=alpha, f_tau=f_tau)
    ds = Dataset("cycles", ["cycle", "n", "tau", "err", "err_exact", "beta0", "beta1"],
                 config={"p": p, "dt": cfg.dt, "dtau": cfg.dtau, "khat": khat, "k": k,
                         "mu": mu, "alpha": alpha, "f_tau": f_tau, "bdf": cfg.bdf.order})
    for name in cycles:
        spec = single_level(p, 1) if name == "base" else preset_cycle(name, p, f_tau)
        run = iterate_cycles(spec, hier, n_cycles)
        for c in range(n_cycles + 1):
            ds.rows.append([name, c, run.tau[c], run.err[c], run.err_exact[c],
                            run.primary[c], run.secondary[c]])
    return ds


def default_jobs() -> int:
    return os.cpu_count() or 1


__all__ = ["Dataset", "write_csv", "sweep_stability", "real_axis_limit", "sweep_cfl",
           "dtau_max_advection", "sweep_error", "sweep_contraction", "default_ratios",
           "sweep_ej_contraction", "sweep_cycles", "default_jobs"]
