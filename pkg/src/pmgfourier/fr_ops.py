"""Nodal flux-reconstruction operators and their Bloch-wave symbols.

DG-recovering correction functions (left/right Radau) on Gauss-Legendre
solution points. The first derivative on element ``i`` is::

    du_i/dx = (2/h) (Cm u_{i-1} + C0 u_i + Cp u_{i+1})

with common interface values upwinded by ``alpha`` (1 = full upwind for
positive advection speed, 0.5 = central). The second derivative nests this
operator twice, giving the five-block stencil ``Bm2 .. Bp2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg


class DecompositionError(RuntimeError):
    """Bloch operator could not be diagonalised to the required accuracy."""


def gauss_legendre(n_points: int):
    """Points and weights of the ``n_points`` Gauss-Legendre rule on [-1, 1]."""
    return npleg.leggauss(n_points)


def legendre_vandermonde(x, degree: int) -> np.ndarray:
    """``V[i, n] = L_n(x_i)`` for ``n = 0..degree`` (unnormalised Legendre)."""
    return npleg.legvander(np.asarray(x, dtype=float), degree)


def legendre_vandermonde_grad(x, degree: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty((x.size, degree + 1))
    for n in range(degree + 1):
        c = np.zeros(degree + 1)
        c[n] = 1.0
        out[:, n] = npleg.legval(x, npleg.legder(c))
    return out


def radau_gradients(x, p: int):
    """Gradients of the left/right DG correction functions at ``x``.

    ``h_L = (-1)^p/2 (L_p - L_{p+1})`` and ``h_R = (L_p + L_{p+1})/2``.
    """
    cL = np.zeros(p + 2)
    cR = np.zeros(p + 2)
    cL[p], cL[p + 1] = 0.5 * (-1) ** p, -0.5 * (-1) ** p
    cR[p], cR[p + 1] = 0.5, 0.5
    return npleg.legval(x, npleg.legder(cL)), npleg.legval(x, npleg.legder(cR))


def first_derivative_blocks(D, gL, gR, lL, lR, alpha: float):
    """Neighbour blocks ``(Cm, C0, Cp)`` of the reference-space derivative."""
    Cm = alpha * np.outer(gL, lR)
    C0 = D - alpha * np.outer(gL, lL) - (1.0 - alpha) * np.outer(gR, lR)
    Cp = (1.0 - alpha) * np.outer(gR, lL)
    return Cm, C0, Cp


@dataclass(frozen=True, eq=False)
class FrOperatorSet:
    p: int
    x: np.ndarray
    D: np.ndarray
    gL: np.ndarray
    gR: np.ndarray
    lL: np.ndarray
    lR: np.ndarray
    Cm: np.ndarray
    C0: np.ndarray
    Cp: np.ndarray
    # first-derivative blocks with the diffusive upwinding, used for nesting
    Cm_d: np.ndarray
    C0_d: np.ndarray
    Cp_d: np.ndarray
    Bm2: np.ndarray
    Bm: np.ndarray
    B0: np.ndarray
    Bp: np.ndarray
    Bp2: np.ndarray
    alpha_a: float
    alpha_d: float

    @property
    def n(self) -> int:
        return self.p + 1

    @property
    def advective_blocks(self):
        return self.Cm, self.C0, self.Cp

    @property
    def diffusive_blocks(self):
        return self.Bm2, self.Bm, self.B0, self.Bp, self.Bp2


def _check_alpha(name, value):
    if not 0.5 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0.5, 1], got {value}")


def build_fr_operators(p: int, alpha_a: float = 1.0, alpha_d: float = 0.5,
                       correction: str = "DG", nodes=None) -> FrOperatorSet:
    """Assemble the FR matrices for degree ``p``.

    ``nodes`` overrides the Gauss-Legendre solution points (tests only).
    """
    if p < 0:
        raise ValueError(f"degree must be non-negative, got {p}")
    if correction.upper() != "DG":
        raise ValueError(f"only DG correction functions are supported, got {correction!r}")
    _check_alpha("alpha_a", alpha_a)
    _check_alpha("alpha_d", alpha_d)

    if nodes is None:
        x, _ = gauss_legendre(p + 1)
    else:
        x = np.asarray(nodes, dtype=float)
        if x.shape != (p + 1,):
            raise ValueError(f"need {p + 1} nodes for degree {p}")

    V = legendre_vandermonde(x, p)
    Vinv = np.linalg.inv(V)
    D = legendre_vandermonde_grad(x, p) @ Vinv
    lL = legendre_vandermonde([-1.0], p)[0] @ Vinv
    lR = legendre_vandermonde([1.0], p)[0] @ Vinv
    gL, gR = radau_gradients(x, p)

    Cm, C0, Cp = first_derivative_blocks(D, gL, gR, lL, lR, alpha_a)
    Cmd, C0d, Cpd = first_derivative_blocks(D, gL, gR, lL, lR, alpha_d)
    return FrOperatorSet(
        p=p, x=x, D=D, gL=gL, gR=gR, lL=lL, lR=lR,
        Cm=Cm, C0=C0, Cp=Cp, Cm_d=Cmd, C0_d=C0d, Cp_d=Cpd,
        Bm2=Cmd @ Cmd,
        Bm=Cmd @ C0d + C0d @ Cmd,
        B0=Cmd @ Cpd + C0d @ C0d + Cpd @ Cmd,
        Bp=C0d @ Cpd + Cpd @ C0d,
        Bp2=Cpd @ Cpd,
        alpha_a=float(alpha_a), alpha_d=float(alpha_d),
    )


def advective_symbol(base: FrOperatorSet, h: float, k: float) -> np.ndarray:
    e = np.exp(1j * k * h)
    return (2.0 / h) * (base.Cm / e + base.C0 + base.Cp * e)


def diffusive_symbol(base: FrOperatorSet, h: float, k: float) -> np.ndarray:
    e = np.exp(1j * k * h)
    return (4.0 / h**2) * (base.Bm2 / e**2 + base.Bm / e + base.B0
                           + base.Bp * e + base.Bp2 * e**2)


def bloch_symbol(base: FrOperatorSet, h: float, mu: float, k: float) -> np.ndarray:
    """``Q = -Qa + mu Qd`` without eigendecomposition."""
    return -advective_symbol(base, h, k) + mu * diffusive_symbol(base, h, k)


def element_positions(base: FrOperatorSet, h: float, offset: float = 0.0) -> np.ndarray:
    """Physical node positions of the reference element mapped to ``[offset, offset+h]``."""
    return offset + 0.5 * (base.x + 1.0) * h


@dataclass(frozen=True, eq=False)
class BlochOperator:
    base: FrOperatorSet
    h: float
    mu: float
    k: float
    Qa: np.ndarray
    Qd: np.ndarray
    Q: np.ndarray
    W: np.ndarray
    LambdaQ: np.ndarray
    beta: np.ndarray = field(repr=False)

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of ``Q`` itself, ``i k LambdaQ``."""
        return 1j * self.k * self.LambdaQ

    @property
    def omega(self) -> complex:
        """Exact advection-diffusion frequency ``k (1 - i mu k)``."""
        return self.k * (1.0 - 1j * self.mu * self.k)

    def wave(self, offset: float = 0.0) -> np.ndarray:
        return np.exp(1j * self.k * element_positions(self.base, self.h, offset))

    def modal(self, u) -> np.ndarray:
        """Eigenmode coordinates of a nodal Bloch vector."""
        return np.linalg.solve(self.W, u)


def build_bloch(base: FrOperatorSet, h: float, mu: float, k: float,
                *, tol: float = 1e-9) -> BlochOperator:
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    if k == 0:
        raise ValueError("k = 0 is excluded (Q is not diagonalisable in ik-scaled form)")
    if mu < 0:
        raise ValueError(f"mu must be non-negative, got {mu}")
    Qa = advective_symbol(base, h, k)
    Qd = diffusive_symbol(base, h, k)
    Q = -Qa + mu * Qd

    evals, W = np.linalg.eig(Q)
    # unit-modulus nodal scale, so a resolved wave has |beta_0| -> 1
    W = W * np.sqrt(base.n)
    ctx = f"(k={k}, p={base.p}, alpha=({base.alpha_a}, {base.alpha_d}))"
    if np.linalg.cond(W) > 1e12:
        raise DecompositionError(f"Bloch operator is numerically defective {ctx}")
    v = np.exp(1j * k * element_positions(base, h))
    beta = np.linalg.solve(W, v)
    order = np.argsort(-np.abs(beta), kind="stable")
    W, evals, beta = W[:, order], evals[order], beta[order]

    recon = W @ np.diag(evals) @ np.linalg.inv(W)
    scale = max(np.linalg.norm(Q), 1e-300)
    if np.linalg.norm(Q - recon) > tol * scale:
        raise DecompositionError(f"eigendecomposition residual too large {ctx}")
    return BlochOperator(base=base, h=float(h), mu=float(mu), k=float(k), Qa=Qa, Qd=Qd,
                         Q=Q, W=W, LambdaQ=evals / (1j * k), beta=beta)


def mode_weights(op: BlochOperator, offset: float = 0.0) -> np.ndarray:
    """Mode weights ``beta`` with ``W beta = exp(i k x)`` at the element nodes.

    Index 0 is the primary mode. A non-zero ``offset`` only multiplies
    ``beta`` by a global phase.
    """
    return np.linalg.solve(op.W, op.wave(offset))
