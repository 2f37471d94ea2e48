"""Closed-form dual-time analysis at a single wavenumber.

All matrices are polynomials in ``dtau * Q`` evaluated by Horner's rule; the
M-step propagator uses an iteratively accumulated geometric sum so that no
``(I - P)^{-1}`` is ever formed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fr_ops import BlochOperator
from .schemes import (BdfScheme, ButcherTableau, make_bdf, make_ssprk3,
                      polyval_ascending, stability_polynomial)


class PseudoStepUnstable(RuntimeError):
    def __init__(self, radius: float, dtau: float, where: str = ""):
        self.radius = radius
        self.dtau = dtau
        super().__init__(f"pseudo-step unstable{where}: rho(P) = {radius:.6g} >= 1 "
                         f"at dtau = {dtau:.6g}")


class NoStableStep(RuntimeError):
    pass


@dataclass(frozen=True)
class DualTimeConfig:
    dt: float
    dtau: float
    M: int = 1
    bdf: BdfScheme = None
    tab: ButcherTableau = None

    def __post_init__(self):
        if self.bdf is None:
            object.__setattr__(self, "bdf", make_bdf(2))
        if self.tab is None:
            object.__setattr__(self, "tab", make_ssprk3())
        if not (self.dt > 0 and self.dtau > 0):
            raise ValueError("dt and dtau must be positive")
        if not self.dtau < self.dt:
            raise ValueError(f"dtau ({self.dtau}) must be smaller than dt ({self.dt})")
        if self.M < 0:
            raise ValueError("M must be non-negative")

    @property
    def ratio(self) -> float:
        """``dt / dtau``."""
        return self.dt / self.dtau

    def with_(self, **changes) -> "DualTimeConfig":
        fields = dict(dt=self.dt, dtau=self.dtau, M=self.M, bdf=self.bdf, tab=self.tab)
        fields.update(changes)
        return DualTimeConfig(**fields)


@dataclass(frozen=True, eq=False)
class PropagatorSet:
    P: np.ndarray
    C: np.ndarray
    K: np.ndarray
    R_M: np.ndarray
    S_M: np.ndarray
    P_M: np.ndarray
    T: np.ndarray
    C_B: complex
    sigma: complex
    M: int
    dtau: float
    dt: float

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.P))))


def matrix_polyval(coeffs, Z: np.ndarray) -> np.ndarray:
    """``sum_j coeffs[j] Z^j`` by Horner's rule."""
    eye = np.eye(Z.shape[0], dtype=complex)
    out = coeffs[-1] * eye
    for cj in coeffs[-2::-1]:
        out = out @ Z + cj * eye
    return out


def history_factor(bdf: BdfScheme, omega: complex, dt: float) -> complex:
    """``sum_l B_{l+1} exp(i omega l dt)``: analytic history relative to ``u_n``."""
    return complex(bdf.history_factor(np.exp(1j * omega * dt)))


def geometric_sum(P: np.ndarray, M: int):
    """Return ``(S_M, P^M)`` with ``S_M = sum_{m<M} P^m``."""
    eye = np.eye(P.shape[0], dtype=complex)
    S = np.zeros_like(eye)
    Pm = eye
    for _ in range(M):
        S = S + Pm
        Pm = Pm @ P
    return S, Pm


def propagators_from_Q(Q: np.ndarray, cfg: DualTimeConfig, sigma: complex,
                       *, M: int | None = None, dtau: float | None = None,
                       check: bool = True) -> PropagatorSet:
    M = cfg.M if M is None else M
    dtau = cfg.dtau if dtau is None else dtau
    B0 = cfg.bdf.B0
    gamma, kappa = stability_polynomial(cfg.tab, cfg.bdf, dtau / cfg.dt)
    Z = dtau * Q
    P = matrix_polyval(gamma, Z)
    C = matrix_polyval(kappa, Z)
    K = cfg.dt * B0 * C
    if check:
        rho = float(np.max(np.abs(np.linalg.eigvals(P))))
        if rho >= 1.0:
            raise PseudoStepUnstable(rho, dtau)
    S, PM = geometric_sum(P, M)
    R_M = PM - sigma * (S @ C)
    T = Q - np.eye(Q.shape[0]) / (cfg.dt * B0)
    return PropagatorSet(P=P, C=C, K=K, R_M=R_M, S_M=S, P_M=PM, T=T,
                         C_B=sigma / (cfg.dt * B0), sigma=sigma, M=M, dtau=dtau, dt=cfg.dt)


def build_propagators(op: BlochOperator, cfg: DualTimeConfig, omega: complex | None = None,
                      *, M: int | None = None, dtau: float | None = None,
                      check: bool = True) -> PropagatorSet:
    """P, C, K, the M-step propagator and the residual operator at one wavenumber.

    ``omega`` defaults to the exact dispersion ``k (1 - i mu k)``; the BDF
    history is the analytic Bloch history of that wave.
    """
    omega = op.omega if omega is None else omega
    sigma = history_factor(cfg.bdf, omega, cfg.dt)
    return propagators_from_Q(op.Q, cfg, sigma, M=M, dtau=dtau, check=check)


def scalar_split(lam, cfg: DualTimeConfig):
    """Scalar ``(P, C)`` at eigenvalue ``lam``."""
    gamma, kappa = stability_polynomial(cfg.tab, cfg.bdf, cfg.dtau / cfg.dt)
    z = np.asarray(lam) * cfg.dtau
    return polyval_ascending(gamma, z), polyval_ascending(kappa, z)


def scalar_amplification(lam, cfg: DualTimeConfig, M: int | None = None,
                         sigma=None, closed_form: bool = False):
    """M-step amplification ``u_{n+1,M} / u_n`` for ``u' = lam u``.

    ``sigma`` is the history factor ``sum_l B_{l+1} u_{n-l}/u_n``; by default
    the exact history ``exp(-lam l dt)`` of the scalar ODE. Vectorised over
    ``lam``. The finite-sum form is used unless ``closed_form`` is set.
    """
    M = cfg.M if M is None else M
    lam = np.asarray(lam, dtype=complex)
    P, C = scalar_split(lam, cfg)
    if sigma is None:
        sigma = cfg.bdf.history_factor(np.exp(-lam * cfg.dt))
    if closed_form:
        geo = np.where(np.abs(1 - P) > 0, (1 - P**M) / np.where(P == 1, 1, 1 - P), M)
    else:
        geo = np.zeros_like(P)
        Pm = np.ones_like(P)
        for _ in range(M):
            geo = geo + Pm
            Pm = Pm * P
    return P**M - geo * C * sigma


def nyquist(p: int, h: float, dt: float | None = None):
    """Coupled space-time Nyquist wavenumber and the ``k -> k_hat`` map."""
    if p < 0 or h <= 0 or (dt is not None and dt <= 0):
        raise ValueError("p must be >= 0 and h, dt positive")
    k_space = (p + 1) * math.pi / h
    kNq = k_space if dt is None else min(math.pi / dt, k_space)

    def normalize(k):
        return math.pi * np.asarray(k) / kNq

    return kNq, normalize


def k_from_khat(khat: float, p: int, h: float, dt: float | None = None) -> float:
    kNq, _ = nyquist(p, h, dt)
    return khat * kNq / math.pi


def discrete_error(props: PropagatorSet, op: BlochOperator, omega: complex | None = None,
                   n: int = 0, beta=None, offset: float = 0.0):
    """Fully discrete error ``u_{n+1,M} - u_{n+1}`` of the Bloch wave.

    Returns the nodal error vector of one element and its Euclidean norm.
    """
    omega = op.omega if omega is None else omega
    beta = op.beta if beta is None else np.asarray(beta)
    phase = np.exp(1j * (op.k * offset - omega * n * props.dt))
    decay = np.exp(-1j * omega * props.dt)
    e = phase * ((props.R_M - decay * np.eye(op.Q.shape[0])) @ (op.W @ beta))
    return e, float(np.linalg.norm(e))


def exact_step(op: BlochOperator, dt: float, n: int = 0) -> np.ndarray:
    """Nodal values of the exact solution at step ``n+1`` given ``u_0 = wave``."""
    return np.exp(-1j * op.omega * (n + 1) * dt) * op.wave()


def converged_solution(op: BlochOperator, cfg: DualTimeConfig, u_n=None) -> np.ndarray:
    """Pseudo-time steady state: ``(Q - I/(dt B0)) u = C_B u_n``."""
    u_n = op.wave() if u_n is None else u_n
    sigma = history_factor(cfg.bdf, op.omega, cfg.dt)
    T = op.Q - np.eye(op.Q.shape[0]) / (cfg.dt * cfg.bdf.B0)
    return np.linalg.solve(T, sigma / (cfg.dt * cfg.bdf.B0) * u_n)


def error_history(op: BlochOperator, cfg: DualTimeConfig, m_max: int,
                  reference: str = "exact") -> np.ndarray:
    """``||e_m||`` for ``m = 0..m_max`` pseudo steps of plain dual-time stepping.

    ``reference`` is ``"exact"`` (analytic wave at ``t_{n+1}``) or
    ``"converged"`` (pseudo steady state).
    """
    sigma = history_factor(cfg.bdf, op.omega, cfg.dt)
    props = propagators_from_Q(op.Q, cfg, sigma, M=0, check=False)
    u0 = op.wave()
    target = exact_step(op, cfg.dt) if reference == "exact" else converged_solution(op, cfg)
    src = props.C @ (sigma * u0)
    out = np.empty(m_max + 1)
    u = u0.astype(complex)
    for m in range(m_max + 1):
        out[m] = np.linalg.norm(u - target)
        u = props.P @ u - src
    return out


def stability_margin(ops: Sequence[BlochOperator], cfg: DualTimeConfig, dtau: float,
                     mode: str = "coupled", omega_fn: Callable | None = None) -> float:
    """Worst case over ``ops`` of ``rho(R_M)/|sigma| - 1`` (``<= 0`` means stable).

    Relative, because ``|sigma|`` grows like ``exp(mu k^2 dt)`` for decaying
    waves and an absolute margin would then be pure roundoff.

    ``mode="explicit"`` measures the plain ERK update ``R(dtau Q)`` against 1.
    """
    worst = -np.inf
    for op in ops:
        if mode == "explicit":
            Z = dtau * op.Q
            R = np.eye(Z.shape[0]) + Z @ matrix_polyval(cfg.tab.growth_coefficients(), Z)
            margin = np.max(np.abs(np.linalg.eigvals(R))) - 1.0
        else:
            omega = op.omega if omega_fn is None else omega_fn(op.k)
            sigma = history_factor(cfg.bdf, omega, cfg.dt)
            with np.errstate(over="ignore", invalid="ignore"):
                props = propagators_from_Q(op.Q, cfg, sigma, dtau=dtau, check=False)
            if not np.all(np.isfinite(props.R_M)):
                return np.inf  # P^M overflowed: far outside the stable set
            margin = np.max(np.abs(np.linalg.eigvals(props.R_M))) / abs(sigma) - 1.0
        worst = max(worst, float(margin))
    return worst


def dtau_max(ops: Sequence[BlochOperator], cfg: DualTimeConfig, mode: str = "coupled",
             omega_fn: Callable | None = None, bracket=None, rtol: float = 1e-4,
             atol_margin: float = 1e-9, n_scan: int = 24) -> float:
    """Supremum of the stable pseudo-step set over a wavenumber sweep.

    The coupled set need not contain small steps (``|sigma| < 1`` makes
    ``R_M ~ I`` unstable), so a log-spaced scan first locates the largest
    stable point below the first unstable upper bracket, then bisection
    refines the boundary above it.
    """
    if not ops:
        raise ValueError("need at least one wavenumber")
    p, h = ops[0].p, ops[0].h
    lo, hi = bracket if bracket is not None else (1e-8, 10.0 * h / (p + 1) ** 2)

    def stable(dtau):
        return stability_margin(ops, cfg, dtau, mode, omega_fn) <= atol_margin

    for _ in range(20):
        if not stable(hi):
            break
        hi *= 2.0
    else:
        return hi
    grid = np.geomspace(lo, hi, n_scan)
    flags = [stable(d) for d in grid]
    if not any(flags):
        raise NoStableStep(f"no stable dtau in [{lo:g}, {hi:g}]")
    last = max(i for i, f in enumerate(flags) if f)
    lo, hi = grid[last], grid[last + 1]
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


def make_k_sweep(kNq: float, n: int = 64, spacing: str = "log", kmin_frac: float = 1e-3):
    if spacing == "log":
        return np.geomspace(kmin_frac * kNq, kNq, n)
    return np.linspace(kNq / n, kNq, n)
