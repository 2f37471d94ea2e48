"""Temporal building blocks: explicit Runge-Kutta tableaux and BDF schemes.

The pseudo-time smoother is an explicit RK scheme whose stages see the
BDF source frozen at the start of the pseudo step. Its scalar update splits
into a homogeneous part ``P`` and a history part ``C``::

    u_{m+1} = P(z) u_m - C(z) * sum_l B_{l+1} u_{n-l}

with ``z = lambda * dtau``. Because ``A`` is nilpotent both are polynomials
in ``z`` and are expanded exactly here (no fitting).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping

import numpy as np

MAX_STAGES = 16

_BDF_TABLE = {
    1: (Fraction(1), Fraction(-1)),
    2: (Fraction(2, 3), Fraction(-4, 3), Fraction(1, 3)),
    3: (Fraction(6, 11), Fraction(-18, 11), Fraction(9, 11), Fraction(-2, 11)),
}


class TableauError(ValueError):
    """Raised when a Butcher tableau fails validation."""


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = "erk"

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        for arr in (A, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return len(self.b)

    def growth_coefficients(self) -> np.ndarray:
        """Return ``g_j = b' A^j e`` for ``j = 0..r-1``.

        These are the Taylor coefficients of ``b'(I - zA)^{-1} e``, exact
        because ``A^r = 0``.
        """
        r = self.stages
        g = np.empty(r)
        v = np.ones(r)
        for j in range(r):
            g[j] = self.b @ v
            v = self.A @ v
        return g

    def stability_function(self, z):
        """Plain ERK stability polynomial ``R(z) = 1 + z b'(I - zA)^{-1} e``."""
        g = self.growth_coefficients()
        return 1.0 + z * np.polyval(g[::-1], z)

    def to_record(self) -> dict:
        return {"name": self.name, "stages": self.stages,
                "A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True)
class BdfScheme:
    order: int
    B: tuple

    @property
    def B0(self) -> float:
        return self.B[0]

    @property
    def history(self) -> tuple:
        """Coefficients ``B_1..B_s`` multiplying ``u_n, u_{n-1}, ...``."""
        return self.B[1:]

    def history_factor(self, phase):
        """``sum_l B_{l+1} phase**l``, e.g. ``phase = exp(i omega dt)``."""
        return sum(Bl * phase**l for l, Bl in enumerate(self.history))


def make_bdf(order: int) -> BdfScheme:
    try:
        coeffs = _BDF_TABLE[int(order)]
    except (KeyError, TypeError, ValueError):
        raise ValueError(f"BDF order must be one of 1, 2, 3 (got {order!r})") from None
    return BdfScheme(order=int(order), B=tuple(float(c) for c in coeffs))


def validate_tableau(A, b, *, sum_tol: float = 1e-9) -> None:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    r = len(b)
    if r < 1 or r > MAX_STAGES:
        raise TableauError(f"stages: need 1 <= r <= {MAX_STAGES}, got {r}")
    if A.shape != (r, r):
        raise TableauError(f"A: expected shape ({r}, {r}), got {A.shape}")
    if np.any(np.triu(A) != 0.0):
        raise TableauError("A: must be strictly lower triangular for an explicit scheme")
    if abs(b.sum() - 1.0) > sum_tol:
        raise TableauError(f"b: b does not sum to 1 (sum = {b.sum():.17g})")


def make_tableau(A, b, name: str = "erk") -> ButcherTableau:
    validate_tableau(A, b)
    A = np.asarray(A, dtype=float)
    return ButcherTableau(A=A, b=np.asarray(b, dtype=float), c=A.sum(axis=1), name=name)


def make_ssprk3() -> ButcherTableau:
    A = [[0.0, 0.0, 0.0],
         [1.0, 0.0, 0.0],
         [0.25, 0.25, 0.0]]
    b = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]
    return make_tableau(A, b, name="ssprk3")


def load_tableau(source: Mapping[str, Any]) -> ButcherTableau:
    """Build a tableau from a config record with keys ``stages``, ``A``, ``b``.

    ``A`` is given as full rows (row-major); ``c`` is always recomputed as the
    row sums of ``A``.
    """
    for key in ("stages", "A", "b"):
        if key not in source:
            raise TableauError(f"{key}: missing from tableau record")
    r = int(source["stages"])
    b = np.asarray(source["b"], dtype=float)
    if b.shape != (r,):
        raise TableauError(f"b: expected {r} entries, got {b.size}")
    try:
        A = np.asarray(source["A"], dtype=float).reshape(r, r)
    except ValueError:
        raise TableauError(f"A: expected {r} rows of {r} entries") from None
    return make_tableau(A, b, name=str(source.get("name", f"erk{r}")))


def stability_polynomial(tab: ButcherTableau, bdf: BdfScheme, tau_over_t: float):
    """Coefficients of the dual-time split ``P(z)``, ``C(z)``.

    Returns ``(gamma, kappa)`` with ``P(z) = sum_j gamma_j z^j`` (degree r)
    and ``C(z) = sum_j kappa_j z^j`` (degree r-1), ``z = lambda * dtau``.
    ``P + C`` is the plain ERK stability polynomial.
    """
    if not tau_over_t > 0:
        raise ValueError(f"tau_over_t must be positive, got {tau_over_t}")
    g = tab.growth_coefficients()
    r = len(g)
    s = tau_over_t / bdf.B0
    gamma = np.zeros(r + 1)
    gamma[0] = 1.0
    gamma[1:] += g
    gamma[:r] -= s * g
    kappa = s * g
    return gamma, kappa


def polyval_ascending(coeffs, z):
    """Evaluate ``sum_j coeffs[j] z**j`` (Horner)."""
    out = np.zeros_like(np.asarray(z, dtype=complex)) + coeffs[-1]
    for cj in coeffs[-2::-1]:
        out = out * z + cj
    return out
