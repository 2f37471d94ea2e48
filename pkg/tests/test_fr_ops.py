import numpy as np
import pytest
from hypothesis import given, strategies as st

from pmgfourier.fr_ops import (DecompositionError, advective_symbol, bloch_symbol,
                               build_bloch, build_fr_operators, first_derivative_blocks,
                               gauss_legendre, mode_weights)

alphas = st.floats(0.5, 1.0)


def test_p1_nodes_are_p2_roots():
    x, _ = gauss_legendre(2)
    roots = np.sort(np.roots([1.5, 0.0, -0.5]))
    assert np.allclose(x, roots, atol=1e-15)
    assert np.allclose(x, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)


def test_p1_linear_nodes_derivative_rows():
    ops = build_fr_operators(1, nodes=[-1.0, 1.0])
    assert np.allclose(ops.D, [[-0.5, 0.5], [-0.5, 0.5]], atol=1e-14)


@pytest.mark.parametrize("p", range(0, 7))
def test_differentiation_exact_on_monomials(p):
    ops = build_fr_operators(p)
    for n in range(p + 1):
        d_exact = n * ops.x ** (n - 1) if n else np.zeros_like(ops.x)
        assert np.max(np.abs(ops.D @ ops.x**n - d_exact)) < 1e-10


@pytest.mark.parametrize("p", range(0, 7))
def test_interface_interpolation(p):
    ops = build_fr_operators(p)
    for n in range(p + 1):
        assert abs(ops.lL @ ops.x**n - (-1.0) ** n) < 1e-10
        assert abs(ops.lR @ ops.x**n - 1.0) < 1e-10


@pytest.mark.parametrize("p", range(0, 7))
def test_correction_gradient_integrals(p):
    # h_L goes 1 -> 0 over [-1, 1], h_R goes 0 -> 1
    x, w = gauss_legendre(p + 2)
    from pmgfourier.fr_ops import radau_gradients
    gL, gR = radau_gradients(x, p)
    assert abs(w @ gL + 1.0) < 1e-12
    assert abs(w @ gR - 1.0) < 1e-12


@pytest.mark.parametrize("p", range(0, 7))
@given(aa=alphas, ad=alphas)
def test_b_blocks_by_nested_derivative(p, aa, ad):
    ops = build_fr_operators(p, aa, ad)
    # independent re-derivation: apply the 3-block stencil twice on 5 elements
    Cm, C0, Cp = first_derivative_blocks(ops.D, ops.gL, ops.gR, ops.lL, ops.lR, ad)
    n = p + 1
    big = np.zeros((5 * n, 5 * n))
    for i in range(5):
        for j, blk in ((i - 1, Cm), (i, C0), (i + 1, Cp)):
            if 0 <= j < 5:
                big[i * n:(i + 1) * n, j * n:(j + 1) * n] = blk
    row = (big @ big)[2 * n:3 * n]
    blocks = [row[:, j * n:(j + 1) * n] for j in range(5)]
    for got, want in zip(blocks, ops.diffusive_blocks):
        assert np.allclose(got, want, atol=1e-12)
    assert np.allclose(ops.Bm2, ops.Cm_d @ ops.Cm_d, atol=1e-12)
    assert np.allclose(ops.Bp2, ops.Cp_d @ ops.Cp_d, atol=1e-12)


@pytest.mark.parametrize("p", range(0, 7))
def test_upwind_limit_drops_downstream_block(p):
    ops = build_fr_operators(p, 1.0, 0.5)
    assert np.allclose(ops.Cp, 0.0)
    assert np.allclose(ops.Cm, np.outer(ops.gL, ops.lR))


@pytest.mark.parametrize("p", range(0, 7))
def test_advective_stencil_kills_constants(p):
    ops = build_fr_operators(p, 0.8, 0.6)
    one = np.ones(p + 1)
    assert np.allclose((ops.Cm + ops.C0 + ops.Cp) @ one, 0.0, atol=1e-11)
    assert np.allclose(sum(ops.diffusive_blocks) @ one, 0.0, atol=1e-10)


def test_upwind_dispersion_limit():
    # primary eigenvalue of (h/2) Qa tends to i k h / 2 as kh -> 0
    ops = build_fr_operators(4, 1.0, 0.5)
    for kh in (1e-1, 1e-2):
        ev = np.linalg.eigvals(0.5 * advective_symbol(ops, 1.0, kh))
        target = 0.5j * kh
        assert np.min(np.abs(ev - target)) < 1e-6 * kh


def _primary_error(p, mu, k):
    op = build_bloch(build_fr_operators(p, 1.0, 0.5), 1.0, mu, k)
    return abs(op.eigenvalues[0] - (-1j * op.omega))


@pytest.mark.parametrize("mu", [0.0, 0.5])
def test_primary_eigenvalue_refinement_order(mu):
    # Richardson-style study in kh at fixed h
    ks = np.array([1.6, 0.8, 0.4])
    errs = np.array([_primary_error(4, mu, k) for k in ks])
    assert errs[-1] > 1e-13  # still above roundoff
    orders = np.log(errs[:-1] / errs[1:]) / np.log(2.0)
    assert np.all(orders >= 4.0)


@pytest.mark.parametrize("p", range(1, 7))
def test_bloch_reconstruction_and_invariants(p):
    ops = build_fr_operators(p)
    op = build_bloch(ops, 1.0, 0.3, 0.7)
    recon = 1j * op.k * op.W @ np.diag(op.LambdaQ) @ np.linalg.inv(op.W)
    assert np.linalg.norm(op.Q - recon) <= 1e-9 * np.linalg.norm(op.Q)
    assert np.argmax(np.abs(op.beta)) == 0


def test_full_period_wave_sums_blocks():
    ops = build_fr_operators(3, 0.9, 0.6)
    Qa = advective_symbol(ops, 1.0, 2 * np.pi)
    assert np.allclose(Qa, 2.0 * (ops.Cm + ops.C0 + ops.Cp), atol=1e-12)


@given(st.floats(0.05, 3.0), st.floats(0.0, 1.0), alphas, alphas)
def test_periodicity_and_conjugacy(k, mu, aa, ad):
    ops = build_fr_operators(3, aa, ad)
    Q = bloch_symbol(ops, 1.0, mu, k)
    assert np.allclose(Q, bloch_symbol(ops, 1.0, mu, k + 2 * np.pi), atol=1e-10)
    assert np.allclose(bloch_symbol(ops, 1.0, mu, -k), Q.conj(), atol=1e-12)


def test_resolved_wave_is_primary():
    ops = build_fr_operators(4)
    beta = build_bloch(ops, 1.0, 0.0, 1e-3).beta
    assert abs(abs(beta[0]) - 1.0) < 1e-6
    assert np.all(np.abs(beta[1:]) < 1e-6)


def test_fig6_scale_separation():
    ops = build_fr_operators(4, 1.0, 0.5)
    k = (np.pi / 16) * 5.0  # k_hat = pi/16, spatial Nyquist binds at dt = 0.07
    beta = build_bloch(ops, 1.0, 0.5, k).beta
    assert abs(beta[1]) < 1e-3 * abs(beta[0])


@given(st.floats(0.0, 10.0))
def test_mode_weight_magnitudes_offset_invariant(offset):
    op = build_bloch(build_fr_operators(3), 1.0, 0.2, 1.3)
    assert np.allclose(np.abs(mode_weights(op, offset)), np.abs(op.beta), atol=1e-10)
    assert np.sum(np.abs(op.beta) ** 2) > 0


@pytest.mark.parametrize("bad", [dict(p=-1), dict(p=2, alpha_a=0.4), dict(p=2, alpha_d=1.2),
                                 dict(p=2, correction="SD")])
def test_build_rejects(bad):
    with pytest.raises(ValueError):
        build_fr_operators(**bad)


def test_bloch_rejects_bad_input():
    ops = build_fr_operators(2)
    with pytest.raises(ValueError):
        build_bloch(ops, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        build_bloch(ops, -1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        build_bloch(ops, 1.0, -0.1, 1.0)


def test_decomposition_error_carries_context():
    ops = build_fr_operators(2)
    with pytest.raises(DecompositionError, match="k=1.0"):
        build_bloch(ops, 1.0, 0.0, 1.0, tol=-1.0)
