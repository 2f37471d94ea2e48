"""Periodic 1D FR advection-diffusion in physical space.

Brute-force counterpart of the Bloch analysis: the same element blocks are
applied with ``np.roll`` stencils on an ``(N, p+1)`` array, and the pseudo
time smoother runs the RK stages literally, with the BDF term frozen at the
start of each pseudo step. The multigrid driver in :mod:`pmgfourier.pmg`
runs unchanged on :class:`TimeHierarchy`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dualtime import DualTimeConfig
from .fr_ops import FrOperatorSet, build_fr_operators, element_positions
from .pmg import CycleSpec, build_transfers, ej_inverse_jacobian, run_cycle
from .schemes import BdfScheme, make_bdf

DIVERGENCE_FACTOR = 1e6


class Diverged(RuntimeError):
    def __init__(self, step: int, norm: float, start_norm: float):
        self.step = step
        self.norm = norm
        self.start_norm = start_norm
        super().__init__(f"pseudo iteration diverged at step {step}: "
                         f"||u|| = {norm:.3e} (start {start_norm:.3e})")


@dataclass(frozen=True)
class Grid1D:
    N: int
    h: float = 1.0

    def __post_init__(self):
        if self.N < 1 or not self.h > 0:
            raise ValueError("need N >= 1 elements and h > 0")

    @property
    def length(self) -> float:
        return self.N * self.h

    def wavenumbers(self) -> np.ndarray:
        """Wavenumbers ``2 pi j / (N h)`` representable on the grid."""
        return 2.0 * np.pi * np.arange(self.N) / self.length

    def nodes(self, base: FrOperatorSet) -> np.ndarray:
        """Physical node positions, shape ``(N, p+1)``."""
        return np.stack([element_positions(base, self.h, i * self.h) for i in range(self.N)])

    @classmethod
    def for_wavenumber(cls, k: float, h: float = 1.0, n_min: int = 16,
                       n_max: int = 4096) -> "Grid1D":
        """Smallest grid with ``N >= n_min`` on which ``exp(i k x)`` is periodic."""
        frac = Fraction(k * h / (2.0 * np.pi)).limit_denominator(n_max)
        if abs(float(frac) - k * h / (2.0 * np.pi)) > 1e-12:
            raise ValueError(f"k = {k} is not periodic on any grid with N <= {n_max}")
        N = frac.denominator
        N *= math.ceil(n_min / N)
        return cls(N=N, h=h)


def _as_grid_array(u, grid: Grid1D, n: int) -> np.ndarray:
    u = np.asarray(u)
    if u.shape == (grid.N, n):
        return u
    if u.size != grid.N * n:
        raise ValueError(f"expected {grid.N * n} values, got {u.size}")
    return u.reshape(grid.N, n)


def residual(u, mu: float, ops: FrOperatorSet, grid: Grid1D) -> np.ndarray:
    """``-du/dx + mu d2u/dx2`` on the periodic grid; ``u`` has shape ``(N, p+1)``."""
    u = _as_grid_array(u, grid, ops.n)
    h = grid.h

    def sh(s):
        # neighbour u_{i+s}
        return np.roll(u, -s, axis=0)

    adv = (2.0 / h) * (sh(-1) @ ops.Cm.T + u @ ops.C0.T + sh(1) @ ops.Cp.T)
    out = -adv
    if mu:
        diff = (sh(-2) @ ops.Bm2.T + sh(-1) @ ops.Bm.T + u @ ops.B0.T
                + sh(1) @ ops.Bp.T + sh(2) @ ops.Bp2.T)
        out = out + mu * (4.0 / h**2) * diff
    return out


class TimeLevel:
    """One multigrid level on the full periodic grid."""

    def __init__(self, ops: FrOperatorSet, grid: Grid1D, mu: float, cfg: DualTimeConfig,
                 dtau: float, smoother: str = "erk", ej_kappa: float = 0.5):
        self.ops = ops
        self.grid = grid
        self.mu = mu
        self.cfg = cfg
        self.dtau = dtau
        self.smoother = smoother
        self.ej_kappa = ej_kappa
        self.inv_dtB0 = 1.0 / (cfg.dt * cfg.bdf.B0)
        self.Jinv = (ej_inverse_jacobian(ops, grid.h, mu, cfg.dt, cfg.bdf.B0)
                     if smoother == "ej" else None)

    def spatial(self, u):
        return residual(u, self.mu, self.ops, self.grid)

    def residual_operator(self, u):
        """``T u = L u - u/(dt B0)``."""
        return self.spatial(u) - self.inv_dtB0 * u

    def pseudo_step(self, u, b):
        """One RK pseudo step of ``du/dtau = L u - u/(dt B0) - b``.

        The ``u/(dt B0) + b`` part is frozen at the step start; only the
        spatial operator sees the stage values.
        """
        tab = self.cfg.tab
        frozen = self.inv_dtB0 * u + b
        q = []
        for i in range(tab.stages):
            ui = u
            for j in range(i):
                if tab.A[i, j]:
                    ui = ui + self.dtau * tab.A[i, j] * q[j]
            q.append(self.spatial(ui) - frozen)
        return u + self.dtau * sum(bi * qi for bi, qi in zip(tab.b, q))

    def smooth(self, u, b, steps: int):
        for _ in range(steps):
            if self.smoother == "ej":
                u = u - self.ej_kappa * ((self.residual_operator(u) - b) @ self.Jinv.T)
            else:
                u = self.pseudo_step(u, b)
        return u


@dataclass(eq=False)
class TimeHierarchy:
    levels: dict
    transfers: object
    grid: Grid1D
    cfg: DualTimeConfig
    mu: float

    @property
    def p(self) -> int:
        return max(self.levels)

    @property
    def fine(self) -> TimeLevel:
        return self.levels[self.p]

    def restrict(self, level, v):
        return self.transfers.restrict(level, v)

    def prolong(self, level, v):
        return self.transfers.prolong(level, v)


def build_time_hierarchy(p: int, grid: Grid1D, cfg: DualTimeConfig, *, mu: float = 0.0,
                         alpha=(1.0, 0.5), f_tau: float = 1.0, smoother: str = "erk",
                         ej_kappa: float = 0.5, l_min: int | None = None) -> TimeHierarchy:
    """Levels ``l_min..p``; a single level when ``p == 0`` or ``l_min == p``."""
    l_min = (0 if p >= 1 else p) if l_min is None else l_min
    levels = {}
    for i in range(l_min, p + 1):
        ops = build_fr_operators(i, *alpha)
        levels[i] = TimeLevel(ops, grid, mu, cfg, cfg.dtau * f_tau ** (p - i),
                              smoother, ej_kappa)
    transfers = build_transfers(p) if l_min < p else None
    return TimeHierarchy(levels=levels, transfers=transfers, grid=grid, cfg=cfg, mu=mu)


def history_source(history, bdf: BdfScheme, dt: float):
    """``sum_l B_{l+1} u_{n-l} / (dt B0)`` from ``history = [u_n, u_{n-1}, ...]``."""
    if len(history) < len(bdf.history):
        raise ValueError(f"BDF{bdf.order} needs {len(bdf.history)} history levels, "
                         f"got {len(history)}")
    acc = sum(Bl * u for Bl, u in zip(bdf.history, history))
    return acc / (dt * bdf.B0)


@dataclass
class StepResult:
    u: np.ndarray
    pseudo_steps: int
    residual_norms: list = field(default_factory=list)
    error_norms: list = field(default_factory=list)


def dual_time_step(hier: TimeHierarchy, history, *, n_iter: int, spec: CycleSpec | None = None,
                   reference=None, error_element: int | None = None,
                   divergence_factor: float = DIVERGENCE_FACTOR) -> StepResult:
    """Advance one physical step from ``history = [u_n, u_{n-1}, ...]``.

    Without ``spec`` this is ``n_iter`` plain pseudo steps, with one norm
    recorded per pseudo step. With ``spec`` it is ``n_iter`` cycles and one
    norm per cycle. ``reference`` (if given) is subtracted for the error
    norms, restricted to ``error_element`` when that is set. Raises
    :class:`Diverged` once ``||u||`` exceeds ``divergence_factor`` times its
    starting value.
    """
    cfg = hier.cfg
    fine = hier.fine
    u = np.array(history[0], dtype=complex)
    hs = history_source(history, cfg.bdf, cfg.dt)
    start = max(np.linalg.norm(u), 1e-300)
    res = StepResult(u=u, pseudo_steps=0)

    def record():
        res.residual_norms.append(float(np.linalg.norm(fine.residual_operator(u) - hs)))
        if reference is not None:
            e = u - reference
            if error_element is not None:
                e = e[error_element]
            res.error_norms.append(float(np.linalg.norm(e)))

    record()
    for it in range(n_iter):
        if spec is None:
            u = fine.smooth(u, hs, 1)
            res.pseudo_steps += 1
        else:
            u = run_cycle(spec, hier, u, hs)[0]
            res.pseudo_steps += spec.fine_steps
        record()
        norm = np.linalg.norm(u)
        if not np.isfinite(norm) or norm > divergence_factor * start:
            raise Diverged(it + 1, float(norm), float(start))
    res.u = u
    return res


def march(hier: TimeHierarchy, u0, n_steps: int, *, n_iter: int,
          spec: CycleSpec | None = None, history=None) -> list:
    """Integrate ``n_steps`` physical steps; returns ``[u_0, u_1, ...]``.

    Without an explicit ``history`` the first steps bootstrap with lower BDF
    orders (BDF1, then BDF2) until enough levels exist.
    """
    cfg = hier.cfg
    order = cfg.bdf.order
    hist = [np.asarray(u0, dtype=complex)] if history is None else [np.asarray(h) for h in history]
    out = [hist[0]]
    for _ in range(n_steps):
        use = min(order, len(hist))
        if use != order:
            boot = cfg.with_(bdf=make_bdf(use))
            step_hier = _rebind(hier, boot)
        else:
            step_hier = hier
        u = dual_time_step(step_hier, hist, n_iter=n_iter, spec=spec).u
        hist = [u] + hist[:order - 1]
        out.append(u)
    return out


def _rebind(hier: TimeHierarchy, cfg: DualTimeConfig) -> TimeHierarchy:
    levels = {i: TimeLevel(lv.ops, lv.grid, lv.mu, cfg, lv.dtau, lv.smoother, lv.ej_kappa)
              for i, lv in hier.levels.items()}
    return TimeHierarchy(levels=levels, transfers=hier.transfers, grid=hier.grid,
                         cfg=cfg, mu=hier.mu)


def bloch_history(grid: Grid1D, base: FrOperatorSet, k: float, omega: complex,
                  dt: float, levels: int) -> list:
    """Exact history ``[u_n, u_{n-1}, ...]`` of ``exp(i (k x - omega t))`` at ``t_n = 0``."""
    x = grid.nodes(base)
    return [np.exp(1j * (k * x + omega * l * dt)) for l in range(levels)]


def write_snapshot(path, grid: Grid1D, base: FrOperatorSet, snapshots) -> None:
    """CSV of ``(step, element, node, x, re_u, im_u)``; ``snapshots`` maps step -> u."""
    x = grid.nodes(base)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "element", "node", "x", "re_u", "im_u"])
        for step, u in snapshots.items():
            u = _as_grid_array(u, grid, base.n)
            for e in range(grid.N):
                for j in range(base.n):
                    val = complex(u[e, j])
                    w.writerow([step, e, j, f"{x[e, j]:.17g}",
                                f"{val.real:.17g}", f"{val.imag:.17g}"])


__all__ = [
    "Diverged", "Grid1D", "residual", "TimeLevel", "TimeHierarchy", "build_time_hierarchy",
    "history_source", "StepResult", "dual_time_step", "march", "bloch_history",
    "write_snapshot",
]
