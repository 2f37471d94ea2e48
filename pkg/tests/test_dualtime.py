import numpy as np
import pytest
from hypothesis import given, strategies as st

from pmgfourier.dualtime import (DualTimeConfig, NoStableStep, PropagatorSet,
                                 PseudoStepUnstable, build_propagators, converged_solution,
                                 discrete_error, dtau_max, error_history, geometric_sum,
                                 history_factor, k_from_khat, make_k_sweep, nyquist,
                                 propagators_from_Q, scalar_amplification, scalar_split,
                                 stability_margin)
from pmgfourier.fr_ops import build_bloch, build_fr_operators
from pmgfourier.schemes import make_bdf, make_ssprk3


def erk_matrix(tab, Z):
    """Plain ERK one-step matrix by literal stage recursion on ``u' = Z u``."""
    n = Z.shape[0]
    out = np.empty((n, n), dtype=complex)
    for j in range(n):
        u = np.eye(n, dtype=complex)[:, j]
        q = []
        for i in range(tab.stages):
            ui = u + sum(tab.A[i, l] * q[l] for l in range(i))
            q.append(Z @ ui)
        out[:, j] = u + sum(b * qi for b, qi in zip(tab.b, q))
    return out


@pytest.fixture(scope="module")
def op4():
    return build_bloch(build_fr_operators(4, 1.0, 0.5), 1.0, 0.1, 1.2)


def test_config_requires_dtau_below_dt():
    with pytest.raises(ValueError):
        DualTimeConfig(dt=0.1, dtau=0.1)
    cfg = DualTimeConfig(dt=0.2, dtau=0.05)
    assert cfg.ratio == 4.0 and cfg.bdf.order == 2 and cfg.tab.name == "ssprk3"


def test_zero_steps_is_identity(op4):
    props = build_propagators(op4, DualTimeConfig(dt=0.07, dtau=7e-3), M=0)
    assert np.allclose(props.R_M, np.eye(5))


def test_zero_operator_bdf2():
    dt, dtau = 0.2, 0.01
    props = propagators_from_Q(np.zeros((3, 3)), DualTimeConfig(dt=dt, dtau=dtau), 1.0)
    assert np.allclose(props.P, (1 - 3 * dtau / (2 * dt)) * np.eye(3), atol=1e-15)


def test_one_step_propagator(op4):
    props = build_propagators(op4, DualTimeConfig(dt=0.07, dtau=7e-3), M=1)
    assert np.allclose(props.R_M, props.P - props.C * props.sigma, atol=1e-14)


@given(st.floats(0.05, 5.0), st.floats(1e-3, 0.05), st.floats(0.05, 0.9), st.floats(0, 1.0),
       st.sampled_from([1, 2, 3]))
def test_split_matrix_identity(k, dtau, frac, mu, order):
    op = build_bloch(build_fr_operators(3), 1.0, mu, k)
    cfg = DualTimeConfig(dt=dtau / frac, dtau=dtau, bdf=make_bdf(order))
    props = build_propagators(op, cfg, check=False)
    assert np.allclose(props.P + props.C, erk_matrix(cfg.tab, dtau * op.Q), atol=1e-10)


def test_geometric_sum_identity(op4):
    props = build_propagators(op4, DualTimeConfig(dt=0.07, dtau=7e-3), M=30)
    lhs = props.S_M @ (np.eye(5) - props.P)
    assert np.allclose(lhs, np.eye(5) - props.P_M, atol=1e-9)


@pytest.mark.parametrize("M", [1, 7, 200])
def test_accumulated_propagator_equals_stepping(op4, M):
    cfg = DualTimeConfig(dt=0.07, dtau=7e-3)
    props = build_propagators(op4, cfg, M=M)
    lit = np.empty((5, 5), dtype=complex)
    for j in range(5):
        u0 = np.eye(5)[:, j].astype(complex)
        u = u0.copy()
        for _ in range(M):
            u = props.P @ u - props.C @ (props.sigma * u0)
        lit[:, j] = u
    assert np.allclose(lit, props.R_M, atol=1e-9)


def test_scalar_amplification_matches_eigenvalues(op4):
    cfg = DualTimeConfig(dt=0.07, dtau=7e-3, M=12)
    props = build_propagators(op4, cfg)
    amp = scalar_amplification(op4.eigenvalues, cfg, sigma=props.sigma)
    ev = np.linalg.eigvals(props.R_M)
    for a in amp:
        assert np.min(np.abs(ev - a)) < 1e-8


def test_scalar_steady_state_is_unit():
    cfg = DualTimeConfig(dt=0.2, dtau=0.05, M=2000)
    assert abs(scalar_amplification(0.0, cfg) - 1.0) < 1e-10


def test_scalar_one_step_direct():
    cfg = DualTimeConfig(dt=0.2, dtau=0.05, M=1)
    tab, B0 = cfg.tab, cfg.bdf.B0
    rng = np.random.default_rng(3)
    lam = -rng.uniform(0, 20, 100) + 1j * rng.uniform(-20, 20, 100)
    for l in lam:
        G = tab.b @ np.linalg.solve(np.eye(3) - l * cfg.dtau * tab.A, np.ones(3))
        P = 1 + (l * cfg.dtau - cfg.dtau / (cfg.dt * B0)) * G
        C = cfg.dtau * G / (cfg.dt * B0)
        hist = cfg.bdf.history_factor(np.exp(-l * cfg.dt))
        assert abs(scalar_amplification(l, cfg) - (P - C * hist)) < 1e-12


def test_closed_form_matches_finite_sum():
    cfg = DualTimeConfig(dt=0.2, dtau=0.05, M=10)
    lam = np.array([-3 + 1j, -0.5 - 2j, -10.0])
    assert np.all(np.abs(scalar_split(lam, cfg)[0]) < 1)
    a = scalar_amplification(lam, cfg)
    b = scalar_amplification(lam, cfg, closed_form=True)
    assert np.allclose(a, b, atol=1e-12)


def test_nyquist_examples():
    kNq, norm = nyquist(4, 1.0, 0.2)
    assert np.isclose(kNq, 5 * np.pi) and np.isclose(np.pi / 0.2, 5 * np.pi)
    assert np.isclose(nyquist(4, 1.0, 0.5)[0], 2 * np.pi)
    assert np.isclose(norm(kNq), np.pi)
    assert np.isclose(k_from_khat(np.pi / 8, 4, 1.0, 0.5), np.pi / 4)
    with pytest.raises(ValueError):
        nyquist(4, 0.0)


def test_exact_propagator_has_zero_error(op4):
    cfg = DualTimeConfig(dt=0.07, dtau=7e-3)
    props = build_propagators(op4, cfg, M=3)
    exact = PropagatorSet(**{**props.__dict__,
                             "R_M": np.exp(-1j * op4.omega * cfg.dt) * np.eye(5)})
    assert discrete_error(exact, op4)[1] < 1e-14


def test_initialisation_error(op4):
    cfg = DualTimeConfig(dt=0.07, dtau=7e-3)
    props = build_propagators(op4, cfg, M=0)
    e, _ = discrete_error(props, op4)
    want = (1 - np.exp(-1j * op4.omega * cfg.dt)) * (op4.W @ op4.beta)
    assert np.allclose(e, want, atol=1e-14)


@given(st.integers(0, 50), st.floats(0, 20))
def test_error_norm_phase_invariant(n, offset):
    op = build_bloch(build_fr_operators(3), 1.0, 0.0, 0.9)
    props = build_propagators(op, DualTimeConfig(dt=0.1, dtau=0.01), M=4)
    assert np.isclose(discrete_error(props, op, n=n, offset=offset)[1],
                      discrete_error(props, op)[1], rtol=1e-10)


def test_error_history_matches_discrete_error(op4):
    cfg = DualTimeConfig(dt=0.07, dtau=7e-3)
    hist = error_history(op4, cfg, 25)
    pred = [discrete_error(build_propagators(op4, cfg, M=m), op4)[1] for m in range(26)]
    assert np.allclose(hist, pred, rtol=1e-10)


def test_converged_solution_is_fixed_point(op4):
    cfg = DualTimeConfig(dt=0.07, dtau=7e-3, M=1)
    u = converged_solution(op4, cfg)
    props = build_propagators(op4, cfg)
    step = props.P @ u - props.C @ (props.sigma * op4.wave())
    assert np.allclose(step, u, atol=1e-12)


def test_error_decay_and_high_k_floor():
    # p=4 upwind advection, dt=0.2, dtau=0.05, BDF2 + SSPRK3
    cfg = DualTimeConfig(dt=0.2, dtau=0.05)
    base = build_fr_operators(4, 1.0, 0.5)
    for kh in (np.pi / 16, np.pi / 8, np.pi / 4):
        op = build_bloch(base, 1.0, 0.0, k_from_khat(kh, 4, 1.0, cfg.dt))
        e = error_history(op, cfg, 200)
        floor = e[-1]
        j = np.nonzero(e <= 1.1 * floor)[0][0]
        # monotone down to the neighbourhood of the floor, small approach wiggle after
        assert np.all(np.diff(e[:j + 1]) < 0)
        assert np.all(np.abs(e[j:] - floor) <= 0.1 * floor)
        assert floor < 0.5 * e[0]
    op = build_bloch(base, 1.0, 0.0, k_from_khat(0.95 * np.pi, 4, 1.0, cfg.dt))
    e = error_history(op, cfg, 400)
    assert e[-1] > 0.1 and abs(e[-1] - e[-2]) < 1e-6 * e[-1]


def test_unstable_pseudo_step_raises(op4):
    with pytest.raises(PseudoStepUnstable) as info:
        build_propagators(op4, DualTimeConfig(dt=10.0, dtau=5.0))
    assert info.value.radius >= 1 and info.value.dtau == 5.0


def _ops(p, mu, dt=None, n=64):
    base = build_fr_operators(p, 1.0, 0.5)
    kNq, _ = nyquist(p, 1.0, dt)
    return [build_bloch(base, 1.0, mu, k) for k in make_k_sweep(kNq, n)]


def test_explicit_limit_matches_margin_sign():
    ops = _ops(3, 0.0)
    cfg = DualTimeConfig(dt=1e3, dtau=1e-3)
    d = dtau_max(ops, cfg, "explicit")
    assert stability_margin(ops, cfg, 0.99 * d, "explicit") <= 1e-9
    assert stability_margin(ops, cfg, 1.01 * d, "explicit") > 0


def test_explicit_limit_decreases_with_mu():
    cfg = DualTimeConfig(dt=1e3, dtau=1e-3)
    vals = [dtau_max(_ops(3, mu), cfg, "explicit") for mu in (0.0, 0.01, 0.1, 1.0)]
    assert np.all(np.diff(vals) < 0)


def test_first_pseudo_step_more_restrictive():
    dt = 0.1  # below the dt = 0.2 temporal/spatial crossover for p = 4
    ops = _ops(4, 0.0, dt)
    d1 = dtau_max(ops, DualTimeConfig(dt=dt, dtau=1e-4, M=1), "coupled")
    d10 = dtau_max(ops, DualTimeConfig(dt=dt, dtau=1e-4, M=10), "coupled")
    assert d1 < d10


def test_no_stable_step_raises():
    ops = _ops(2, 0.0)
    with pytest.raises(NoStableStep):
        dtau_max(ops, DualTimeConfig(dt=1e3, dtau=1e-3), "explicit", bracket=(50.0, 100.0))


def test_history_factor_bdf1():
    assert history_factor(make_bdf(1), 2.0 + 0.1j, 0.3) == -1.0


def test_geometric_sum_zero():
    S, PM = geometric_sum(np.eye(2) * 0.5, 0)
    assert np.allclose(S, 0) and np.allclose(PM, np.eye(2))


def test_k_sweep_bounds():
    ks = make_k_sweep(2.0, 16)
    assert ks[-1] == pytest.approx(2.0) and ks[0] > 0 and np.all(np.diff(ks) > 0)
    assert make_k_sweep(2.0, 4, "linear")[0] == pytest.approx(0.5)


def test_ssprk3_tableau_default():
    assert DualTimeConfig(dt=1, dtau=0.1).tab.to_record() == make_ssprk3().to_record()
