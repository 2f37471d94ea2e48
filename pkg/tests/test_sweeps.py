import math

import numpy as np
import pytest

from pmgfourier.dualtime import DualTimeConfig, scalar_amplification
from pmgfourier.sweeps import (Dataset, dtau_max_advection, real_axis_limit, sweep_cfl,
                               sweep_contraction, sweep_cycles, sweep_ej_contraction,
                               sweep_error, sweep_stability, write_csv)

CFG = DualTimeConfig(dt=0.2, dtau=0.05)


def _lam(ds, m):
    rows = [r for r in ds.rows if r[0] == m]
    return np.array([r[2] + 1j * r[3] for r in rows])


def test_contours_are_unit_level_and_conjugate_symmetric():
    ds = sweep_stability(CFG, (1, 10), x_range=(-20, 2), y_range=(-12, 12), n=301)
    for m in (1, 10):
        lam = _lam(ds, m)
        assert lam.size > 10
        amp = np.abs(scalar_amplification(lam, CFG, M=m))
        assert np.max(np.abs(amp - 1.0)) < 5e-2
        mirror = np.abs(scalar_amplification(lam.conj(), CFG, M=m))
        assert np.allclose(amp, mirror, rtol=1e-12)


def test_erk_reference_contour():
    ds = sweep_stability(CFG, (1,), x_range=(-80, 5), y_range=(-60, 60), n=301)
    lam = _lam(ds, "erk")
    amp = np.abs(CFG.tab.stability_function(lam * CFG.dtau))
    assert np.max(np.abs(amp - 1.0)) < 5e-2


def test_empty_window_warns():
    with pytest.warns(UserWarning, match="no \\|amp\\| = 1 contour"):
        ds = sweep_stability(CFG, (1,), x_range=(-0.2, -0.1), y_range=(-0.05, 0.05),
                             n=11, include_erk=False)
    assert ds.rows == []


def test_ssprk3_real_axis_limit():
    # |R(z)| = 1 on the negative real axis at z ~ -2.5127
    cfg = DualTimeConfig(dt=10.0, dtau=1.0)
    assert -2.52 <= real_axis_limit(cfg, lo=-5, n=50001) <= -2.512


def test_explicit_cfl_decreases_with_order():
    ds = sweep_cfl((1, 2, 3, 4), n_k=32)
    vals = ds.column("dtau_max")
    assert np.all(np.diff(vals) < 0)
    assert all(math.isnan(v) for v in ds.column("dt"))


def test_cfl_rejects_unknown_mode():
    with pytest.raises(ValueError):
        sweep_cfl((1,), mode="implicit")


def test_coupled_cfl_rows_and_jobs_invariance():
    kw = dict(mode="coupled", dt_list=(0.5, 2.0), m_list=(1, 3), n_k=16)
    a = sweep_cfl((2,), jobs=1, **kw)
    b = sweep_cfl((2,), jobs=2, **kw)
    assert a.rows == b.rows
    assert len(a.rows) == 4 and all(r[-1] > 0 for r in a.rows)


def test_dtau_max_advection_values():
    assert dtau_max_advection(4) == pytest.approx(0.0897, rel=2e-3)
    assert dtau_max_advection(3) > dtau_max_advection(4)


def test_csv_is_reproducible(tmp_path):
    kw = dict(ratios=[2.0, 20.0, 200.0], jobs=1)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(p1, sweep_contraction(3, **kw))
    write_csv(p2, sweep_contraction(3, **{**kw, "jobs": 2}))
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text().splitlines()
    assert text[0] == "# sweep=contraction"
    assert "ratio,gamma_base,gamma_pmg,benefit" in text
    assert any(line.startswith("# marker.argmax_x=") for line in text)


def test_write_csv_formats(tmp_path):
    ds = Dataset("x", ["a", "b"], rows=[[1, 0.1], [True, np.float64(1 / 3)]],
                 config={"alpha": (1.0, 0.5)})
    write_csv(tmp_path / "x.csv", ds)
    lines = (tmp_path / "x.csv").read_text().splitlines()
    assert lines[1] == "# alpha=1 0.5"
    assert lines[-1] == "1,0.33333333333333331"


def test_contraction_benefit_has_interior_maximum():
    ratios = np.geomspace(1.2, 2000, 16)
    ds = sweep_contraction(4, ratios=ratios)
    assert ds.markers["interior"]
    assert ds.markers["max_benefit"] > 1.0
    assert np.all(ds.column("gamma_pmg") < 1.0)


def test_ej_contraction_rows():
    ds = sweep_ej_contraction(3, dt_list=[1e-2, 1.0])
    assert ds.columns[0] == "dt" and len(ds.rows) == 2
    assert np.all(ds.column("gamma_pmg") <= ds.column("gamma_base"))


def test_error_sweep_starts_at_history_error():
    ds = sweep_error(2, DualTimeConfig(dt=0.07, dtau=7e-3), [np.pi / 8], 5)
    err = ds.column("err")
    assert len(err) == 6 and np.all(err > 0)
    assert err[-1] < err[0]


def test_cycle_sweep_layout():
    ds = sweep_cycles(3, DualTimeConfig(dt=0.07, dtau=7e-3), np.pi / 8, ("base", "v1"),
                      n_cycles=4)
    assert len(ds.rows) == 10
    tau = [r[2] for r in ds.rows if r[0] == "v1"]
    assert tau[0] == 0.0 and np.all(np.diff(tau) > 0)
