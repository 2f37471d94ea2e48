"""p-multigrid cycles for the dual-time system.

The cycle driver is written once against a small level interface
(``residual_operator``, ``smooth``) so that the same leg sequence runs on
single-element Bloch vectors (this module) and on full periodic grids
(:mod:`pmgfourier.timedomain`).

Conventions, with ``T = Q - I/(dt B0)`` and ``hs`` the BDF history source
(``C_B u_n`` for a Bloch wave):

* smoothing at level ``l`` integrates ``du/dtau = T u - hs_l - r_l``
* deficit      ``d_l = r_l - (T_l u_{l,M} - hs_l)``
* restriction  ``u_{l-1,0} = rho u_{l,M}``, ``d_{l-1} = rho d_l``,
  ``hs_{l-1} = rho hs_l``
* coarse source ``r_{l-1} = T_{l-1} u_{l-1,0} - hs_{l-1} + d_{l-1}``
* correction   ``Delta_l = u_{l,0} - u_{l,M}``, ``u_{l+1} -= pi Delta_l``
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dualtime import (DualTimeConfig, PseudoStepUnstable, converged_solution,
                       exact_step, geometric_sum, history_factor, propagators_from_Q)
from .fr_ops import (BlochOperator, bloch_symbol, build_bloch, build_fr_operators,
                     gauss_legendre, legendre_vandermonde)


class CycleSpecError(ValueError):
    pass


# ---------------------------------------------------------------------------
# transfer operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransferOperators:
    """Nodal restriction/prolongation between Gauss-Legendre levels.

    ``rho[i]`` maps degree ``i+1`` to ``i``; ``pi[i]`` maps ``i`` to ``i+1``.
    """
    p: int
    rho: tuple
    pi: tuple
    V: tuple

    def restrict(self, level: int, v):
        """Restrict ``v`` from ``level`` to ``level - 1`` (last axis is nodal)."""
        return v @ self.rho[level - 1].T

    def prolong(self, level: int, v):
        """Prolong ``v`` from ``level`` to ``level + 1``."""
        return v @ self.pi[level].T


def build_transfers(p: int) -> TransferOperators:
    if p < 1:
        raise ValueError(f"p-multigrid needs p >= 1, got {p}")
    V = tuple(legendre_vandermonde(gauss_legendre(i + 1)[0], i) for i in range(p + 1))
    rho, pi = [], []
    for i in range(p):
        trunc = np.eye(i + 1, i + 2)
        rho.append(V[i] @ trunc @ np.linalg.inv(V[i + 1]))
        pi.append(V[i + 1] @ trunc.T @ np.linalg.inv(V[i]))
    return TransferOperators(p=p, rho=tuple(rho), pi=tuple(pi), V=V)


# ---------------------------------------------------------------------------
# cycle specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Leg:
    level: int
    steps: int
    phase: str = ""


@dataclass(frozen=True)
class CycleSpec:
    legs: tuple
    f_tau: float = 1.0
    name: str = ""

    def __post_init__(self):
        legs = tuple(leg if isinstance(leg, Leg) else Leg(**leg) for leg in self.legs)
        if not legs:
            raise CycleSpecError("cycle needs at least one leg")
        p = legs[0].level
        if legs[-1].level != p:
            raise CycleSpecError(f"cycle must end on the fine level {p}")
        if self.f_tau < 1.0:
            raise CycleSpecError("f_tau must be >= 1")
        phased = []
        for j, leg in enumerate(legs):
            if leg.steps < 0:
                raise CycleSpecError(f"leg {j}: negative step count")
            if leg.level > p or leg.level < 0:
                raise CycleSpecError(f"leg {j}: level {leg.level} outside [0, {p}]")
            if j + 1 < len(legs):
                jump = legs[j + 1].level - leg.level
                if abs(jump) != 1:
                    raise CycleSpecError(
                        f"legs {j}->{j + 1}: levels must differ by exactly one "
                        f"({leg.level} -> {legs[j + 1].level})")
                phase = "restrict" if jump < 0 else "prolong"
            else:
                phase = "final"
            phased.append(Leg(leg.level, int(leg.steps), phase))
        object.__setattr__(self, "legs", tuple(phased))

    @property
    def p(self) -> int:
        return self.legs[0].level

    @property
    def n_sp(self) -> int:
        return self.legs[0].steps if len(self.legs) > 1 else 0

    @property
    def n_sp_prime(self) -> int:
        return self.legs[-1].steps

    @property
    def fine_steps(self) -> int:
        """Total fine-level smoothing steps per cycle."""
        return sum(leg.steps for leg in self.legs if leg.level == self.p)

    @property
    def l_min(self) -> int:
        return min(leg.level for leg in self.legs)

    def to_record(self) -> dict:
        return {"name": self.name, "f_tau": self.f_tau,
                "legs": [{"level": g.level, "steps": g.steps} for g in self.legs]}

    @classmethod
    def from_record(cls, rec) -> "CycleSpec":
        if isinstance(rec, str):
            rec = json.loads(rec)
        try:
            legs = [Leg(int(g["level"]), int(g["steps"])) for g in rec["legs"]]
        except (KeyError, TypeError) as exc:
            raise CycleSpecError(f"malformed cycle record: {exc}") from None
        return cls(legs=tuple(legs), f_tau=float(rec.get("f_tau", 1.0)),
                   name=str(rec.get("name", "")))


def single_level(p: int, steps: int) -> CycleSpec:
    return CycleSpec(legs=(Leg(p, steps),), name="base")


def v_cycle(p: int, n_s: int = 1, l_min: int = 0, n_prolong: int | None = None,
            f_tau: float = 1.0, name: str | None = None) -> CycleSpec:
    """V-cycle ``p -> l_min -> p``.

    Restriction legs (``p..l_min+1``) and the final fine smoothing take
    ``n_s`` steps. The prolongation loop (``l_min..p-1``, coarsest included)
    takes ``n_prolong`` steps, default ``n_s``.
    """
    n_prolong = n_s if n_prolong is None else n_prolong
    legs = [Leg(l, n_s) for l in range(p, l_min, -1)]
    legs += [Leg(l, n_prolong) for l in range(l_min, p)]
    legs.append(Leg(p, n_s))
    if name is None:
        name = f"v{n_s}" if n_prolong == n_s else f"vap{n_s}-{n_prolong}"
    return CycleSpec(legs=tuple(legs), f_tau=f_tau, name=name)


def w_cycle(p: int, n_s: int = 1, f_tau: float = 1.0) -> CycleSpec:
    """Two-dip ``W_{p-2}`` cycle: ``p, p-1, p-2, p-1, p-2, p-1, p``."""
    if p < 2:
        raise CycleSpecError("W_{p-2} cycle needs p >= 2")
    levels = [p, p - 1, p - 2, p - 1, p - 2, p - 1, p]
    return CycleSpec(legs=tuple(Leg(l, n_s) for l in levels), f_tau=f_tau, name="w")


def preset_cycle(name: str, p: int, f_tau: float = 1.0) -> CycleSpec:
    """Named presets: ``base``, ``v1``, ``v3``, ``vap`` (n_s=1, prolongation 3), ``w``."""
    if name == "base":
        return single_level(p, 2)
    if name == "v1":
        return v_cycle(p, 1, f_tau=f_tau)
    if name == "v3":
        return v_cycle(p, 3, f_tau=f_tau)
    if name == "vap":
        return v_cycle(p, 1, n_prolong=3, f_tau=f_tau, name="vap")
    if name == "w":
        return w_cycle(p, 1, f_tau=f_tau)
    raise CycleSpecError(f"unknown cycle preset {name!r}")


# ---------------------------------------------------------------------------
# Fourier-space levels
# ---------------------------------------------------------------------------

def ej_inverse_jacobian(base, h: float, mu: float, dt: float, B0: float) -> np.ndarray:
    """Inverse of the element-diagonal Jacobian of ``T u - hs``.

    ``J = -I/(dt B0) - (2/h) C0 + mu (4/h^2) B0_diff``.
    """
    n = base.n
    J = (-np.eye(n) / (dt * B0) - (2.0 / h) * base.C0 + mu * (4.0 / h**2) * base.B0)
    return np.linalg.inv(J)


class FourierLevel:
    """One multigrid level acting on single-element Bloch vectors."""

    def __init__(self, Q: np.ndarray, cfg: DualTimeConfig, sigma: complex, dtau: float,
                 smoother: str = "erk", ej_kappa: float = 0.5, Jinv=None):
        self.Q = Q
        self.cfg = cfg
        self.sigma = sigma
        self.dtau = dtau
        self.smoother = smoother
        self.ej_kappa = ej_kappa
        self.Jinv = Jinv
        self.T = Q - np.eye(Q.shape[0]) / (cfg.dt * cfg.bdf.B0)
        self._props = propagators_from_Q(Q, cfg, sigma, M=0, dtau=dtau,
                                         check=(smoother == "erk"))
        self._cache = {}

    @property
    def P(self):
        return self._props.P

    @property
    def K(self):
        return self._props.K

    @property
    def C(self):
        return self._props.C

    def residual_operator(self, u):
        return self.T @ u

    def step_matrices(self, M: int):
        """``(P^M, S_M)`` for the ERK smoother, cached."""
        if M not in self._cache:
            S, PM = geometric_sum(self.P, M)
            self._cache[M] = (PM, S)
        return self._cache[M]

    def smooth(self, u, b, steps: int):
        """``steps`` smoothing iterations of ``du/dtau = T u - b``."""
        if steps == 0:
            return u
        if self.smoother == "ej":
            for _ in range(steps):
                u = u - self.ej_kappa * (self.Jinv @ (self.T @ u - b))
            return u
        PM, S = self.step_matrices(steps)
        return PM @ u - S @ (self.K @ b)

    def smoothing_matrix(self, steps: int):
        """Return ``(A_u, A_b)`` with ``smooth(u, b) = A_u u + A_b b``."""
        n = self.Q.shape[0]
        if self.smoother == "ej":
            E = np.eye(n) - self.ej_kappa * self.Jinv @ self.T
            Au = np.linalg.matrix_power(E, steps)
            Ab = np.zeros((n, n), dtype=complex)
            for _ in range(steps):
                Ab = E @ Ab + self.ej_kappa * self.Jinv
            return Au, Ab
        PM, S = self.step_matrices(steps)
        return PM, -S @ self.K


@dataclass(eq=False)
class FourierHierarchy:
    """All levels of one Bloch configuration plus the fine-level eigenbasis."""
    levels: dict
    transfers: TransferOperators
    fine: BlochOperator
    cfg: DualTimeConfig
    sigma: complex
    f_tau: float

    @property
    def p(self) -> int:
        return self.fine.p

    @property
    def C_B(self) -> complex:
        return self.sigma / (self.cfg.dt * self.cfg.bdf.B0)

    def restrict(self, level, v):
        return self.transfers.restrict(level, v)

    def prolong(self, level, v):
        return self.transfers.prolong(level, v)


def build_hierarchy(p: int, k: float, cfg: DualTimeConfig, *, mu: float = 0.0,
                    h: float = 1.0, alpha=(1.0, 0.5), f_tau: float = 1.0,
                    smoother: str = "erk", ej_kappa: float = 0.5,
                    l_min: int = 0) -> FourierHierarchy:
    """Bloch levels ``l_min..p`` with pseudo steps ``dtau_i = dtau f_tau^(p-i)``."""
    fine_base = build_fr_operators(p, *alpha)
    fine = build_bloch(fine_base, h, mu, k)
    sigma = history_factor(cfg.bdf, fine.omega, cfg.dt)
    levels = {}
    for i in range(l_min, p + 1):
        base = fine_base if i == p else build_fr_operators(i, *alpha)
        Q = fine.Q if i == p else bloch_symbol(base, h, mu, k)
        dtau_i = cfg.dtau * f_tau ** (p - i)
        Jinv = ej_inverse_jacobian(base, h, mu, cfg.dt, cfg.bdf.B0) if smoother == "ej" else None
        try:
            levels[i] = FourierLevel(Q, cfg, sigma, dtau_i, smoother, ej_kappa, Jinv)
        except PseudoStepUnstable as exc:
            raise PseudoStepUnstable(exc.radius, dtau_i,
                                     f" (f_tau exceeds CFL at level {i})") from None
    transfers = build_transfers(p) if p >= 1 else None
    return FourierHierarchy(levels=levels, transfers=transfers, fine=fine, cfg=cfg,
                            sigma=sigma, f_tau=f_tau)


# ---------------------------------------------------------------------------
# cycle execution
# ---------------------------------------------------------------------------

@dataclass
class CycleState:
    u: dict = field(default_factory=dict)
    u0: dict = field(default_factory=dict)
    d: dict = field(default_factory=dict)
    r: dict = field(default_factory=dict)
    hs: dict = field(default_factory=dict)


@dataclass
class LegRecord:
    level: int
    phase: str
    steps: int
    u: np.ndarray


def run_cycle(spec: CycleSpec, hier, u_start, hist_source, *, trace: bool = False):
    """Execute one cycle; returns ``(u_fine, state, records)``.

    ``hier`` supplies ``levels[l]`` (``residual_operator``, ``smooth``),
    ``restrict(l, v)`` and ``prolong(l, v)``. ``hist_source`` is the fine
    BDF history source ``hs_p``; the fine residual source ``r_p`` is zero.
    """
    p = spec.p
    st = CycleState()
    st.u[p] = u_start
    st.u0[p] = u_start
    st.r[p] = np.zeros_like(u_start)
    st.hs[p] = hist_source
    records = []
    legs = spec.legs
    for j, leg in enumerate(legs):
        l = leg.level
        lev = hier.levels[l]
        st.u[l] = lev.smooth(st.u[l], st.hs[l] + st.r[l], leg.steps)
        if trace:
            records.append(LegRecord(l, leg.phase, leg.steps, st.u[l].copy()))
        if leg.phase == "restrict":
            st.d[l] = st.r[l] - (lev.residual_operator(st.u[l]) - st.hs[l])
            c = l - 1
            st.u[c] = hier.restrict(l, st.u[l])
            st.u0[c] = st.u[c]
            st.d[c] = hier.restrict(l, st.d[l])
            st.hs[c] = hier.restrict(l, st.hs[l])
            st.r[c] = hier.levels[c].residual_operator(st.u[c]) - st.hs[c] + st.d[c]
        elif leg.phase == "prolong":
            delta = st.u0[l] - st.u[l]
            st.u[l + 1] = st.u[l + 1] - hier.prolong(l, delta)
    return st.u[p], st, records


def run_simple_v(hier: FourierHierarchy, u_n, M: int):
    """Literal one-level V-cycle step list, returning every intermediate state."""
    p = hier.p
    fine, coarse = hier.levels[p], hier.levels[p - 1]
    rho, pi = hier.transfers.rho[p - 1], hier.transfers.pi[p - 1]
    CB = hier.C_B
    out = {}
    out["u_p_M"] = fine.smooth(u_n, CB * u_n, M)
    out["d_p"] = 0.0 - (fine.T @ out["u_p_M"] - CB * u_n)
    out["u_c_0"] = rho @ out["u_p_M"]
    out["d_c"] = rho @ out["d_p"]
    out["r_c"] = coarse.T @ out["u_c_0"] - CB * (rho @ u_n) + out["d_c"]
    out["u_c_M"] = coarse.smooth(out["u_c_0"], CB * (rho @ u_n) + out["r_c"], M)
    out["delta_c"] = out["u_c_0"] - out["u_c_M"]
    out["delta_p"] = pi @ out["delta_c"]
    out["v_p_0"] = out["u_p_M"] - out["delta_p"]
    out["u_next"] = fine.smooth(out["v_p_0"], CB * u_n, M)
    return out


def one_level_v_operator(hier: FourierHierarchy, M: int):
    """Closed-form matrix of the one-level V-cycle acting on ``u_n``.

    Built from ``R_{p,M}``, ``S_{p-1,M}`` and the residual maps only; the
    coarse iterate is

        u_{p-1,M} = (P_{p-1}^M rho R_{p,M}
                     - S_{p-1,M} [K_{p-1} T_{p-1} rho R_{p,M} - K_{p-1} rho T_{p,M}]) u_n

    with ``T_{p,M} = T_p R_{p,M} - C_B I`` the fine residual after ``M`` steps.
    """
    p = hier.p
    fine, coarse = hier.levels[p], hier.levels[p - 1]
    rho, pi = hier.transfers.rho[p - 1], hier.transfers.pi[p - 1]
    n = p + 1
    PMf, Sf = fine.step_matrices(M)
    R = PMf - hier.sigma * (Sf @ fine.C)
    TpM = fine.T @ R - hier.C_B * np.eye(n)
    PMc, Sc = coarse.step_matrices(M)
    u_c_M = PMc @ rho @ R - Sc @ (coarse.K @ coarse.T @ rho @ R - coarse.K @ rho @ TpM)
    delta = rho @ R - u_c_M
    v = R - pi @ delta
    return PMf @ v - hier.sigma * (Sf @ fine.C)


def cycle_matrix(spec: CycleSpec, hier: FourierHierarchy):
    """``(S_u, S_h)`` with ``cycle(u, hs) = S_u u + S_h hs``, assembled column-wise."""
    n = hier.p + 1
    eye = np.eye(n, dtype=complex)
    zero = np.zeros(n, dtype=complex)
    Su = np.column_stack([run_cycle(spec, hier, eye[:, j], zero)[0] for j in range(n)])
    Sh = np.column_stack([run_cycle(spec, hier, zero, eye[:, j])[0] for j in range(n)])
    return Su, Sh


# ---------------------------------------------------------------------------
# multi-cycle convergence runs
# ---------------------------------------------------------------------------

@dataclass
class CycleRun:
    spec: CycleSpec
    tau: np.ndarray          # cumulative fine pseudo time after each cycle
    err: np.ndarray          # ||u - u_converged||
    err_exact: np.ndarray    # ||u - u_exact(t_{n+1})||
    beta: np.ndarray         # eigenmode coordinates of u per cycle, (n_cycles+1, p+1)

    @property
    def primary(self):
        return np.abs(self.beta[:, 0])

    @property
    def secondary(self):
        return np.abs(self.beta[:, 1])

    def tau_to_reach(self, threshold: float) -> float:
        """Pseudo time at which ``err`` first crosses ``threshold``.

        Log-linear interpolation between the bracketing cycles, so the
        answer is not quantised to whole cycles.
        """
        hit = np.nonzero(self.err <= threshold)[0]
        if not hit.size:
            return np.inf
        i = hit[0]
        if i == 0:
            return 0.0
        a, b = np.log(self.err[i - 1]), np.log(self.err[i])
        frac = (np.log(threshold) - a) / (b - a)
        return float(self.tau[i - 1] + frac * (self.tau[i] - self.tau[i - 1]))

    def cycles_to_reach(self, threshold: float) -> float:
        hit = np.nonzero(self.err <= threshold)[0]
        return float(hit[0]) if hit.size else np.inf


def iterate_cycles(spec: CycleSpec, hier: FourierHierarchy, n_cycles: int) -> CycleRun:
    """Apply ``n_cycles`` cycles within one physical step, starting from ``u_n``.

    The cycle is linear, so it is assembled once as a matrix and iterated.
    """
    fine = hier.fine
    u_n = fine.wave()
    hs = hier.C_B * u_n
    Su, Sh = cycle_matrix(spec, hier)
    drive = Sh @ hs
    u_star = converged_solution(fine, hier.cfg, u_n)
    u_ex = exact_step(fine, hier.cfg.dt)
    err = np.empty(n_cycles + 1)
    err_ex = np.empty(n_cycles + 1)
    beta = np.empty((n_cycles + 1, hier.p + 1), dtype=complex)
    u = u_n.astype(complex)
    for c in range(n_cycles + 1):
        err[c] = np.linalg.norm(u - u_star)
        err_ex[c] = np.linalg.norm(u - u_ex)
        beta[c] = fine.modal(u)
        u = Su @ u + drive
    tau = np.arange(n_cycles + 1) * spec.fine_steps * hier.cfg.dtau
    return CycleRun(spec=spec, tau=tau, err=err, err_exact=err_ex, beta=beta)


def contraction(before: float, after: float, n_fine: int, p: int | None = None,
                form: str = "ratio") -> float:
    """Per-fine-iteration contraction factor of one cycle.

    ``form="ratio"``: ``(after/before)^(1/n_fine)``. ``form="difference"``:
    the literal difference-of-norms expression ``((after-before)/(p+1))^(1/n_fine)``,
    complex when the base is negative.
    """
    if before == 0:
        raise ZeroDivisionError("error norm before the cycle is zero")
    if form == "ratio":
        return (after / before) ** (1.0 / n_fine)
    if form == "difference":
        if p is None:
            raise ValueError("difference form needs p")
        return complex((after - before) / (p + 1)) ** (1.0 / n_fine)
    raise ValueError(f"unknown contraction form {form!r}")


def initial_contraction(spec: CycleSpec, hier: FourierHierarchy) -> float:
    """Contraction of the first cycle, measured against the pseudo steady state."""
    run = iterate_cycles(spec, hier, 1)
    return contraction(run.err[0], run.err[1], spec.fine_steps, hier.p)


def mode_energy_track(run: CycleRun):
    """Per-cycle ``(|beta_primary|, |beta_secondary|)`` pairs."""
    return np.column_stack([run.primary, run.secondary])
