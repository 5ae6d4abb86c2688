import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cavimag.cavity import CavityParams
from cavimag.constants import GAMMA_LL
from cavimag.errors import ConfigurationError
from cavimag.fields import MaterialParams
from cavimag.integrator import (TIMESERIES_HEADER, Engine, RunConfig, llg_rhs,
                                read_timeseries_csv, run, step_rk4)
from cavimag.mesh import CellState, Mesh

B = 1.0
T_LARMOR = 2 * math.pi / (GAMMA_LL * B)


def macrospin(direction=(1, 0, 0), alpha=0.0, b=(0, 0, B), **kw):
    mesh = Mesh(1, 1, 1, 1e-9, 1e-9, 1e-9)
    state = CellState.uniform(mesh, 8e5, direction)
    return Engine(mesh, state, MaterialParams(8e5, alpha=alpha), b_ext=b, **kw)


def multi_cell(rng, cavity=True, b_rms_scale=1e-3, x0=0.0, p0=0.0):
    mesh = Mesh(3, 2, 2, 2e-9, 2e-9, 2e-9)
    state = CellState(rng.normal(size=(12, 3)), np.full(12, 8e5))
    state.normalize()
    cav = None
    if cavity:
        b = b_rms_scale * np.tile([1.0, 0.2, 0.0], (12, 1))
        cav = CavityParams(2 * math.pi * 5e9, 2 * math.pi * 20e6, b, mesh.cell_volume, x0, p0)
    return Engine(mesh, state, MaterialParams(8e5, aex=1.3e-11, alpha=0.02),
                  enabled={"zeeman", "exchange"}, b_ext=(0, 0, 0.2), cavity=cav)


# -- llg_rhs -------------------------------------------------------------------

def test_rhs_precession_by_hand():
    m = np.array([[1.0, 0.0, 0.0]])
    out = llg_rhs(m, np.array([[0.0, 0.0, B]]), MaterialParams(1.0))
    np.testing.assert_allclose(out, [[0.0, GAMMA_LL * B, 0.0]], rtol=1e-15)


def test_rhs_fixed_point_and_vacuum():
    m = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    b = np.array([[0.0, 0.0, 0.7], [0.3, 0.1, 0.2]])
    assert not np.any(llg_rhs(m, b, MaterialParams(1.0, alpha=0.3)))


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
def test_rhs_is_tangent(seed, alpha):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(16, 3))
    m /= np.linalg.norm(m, axis=1)[:, None]
    b = rng.normal(size=(16, 3))
    d = llg_rhs(m, b, MaterialParams(1.0, alpha=alpha))
    dots = np.abs(np.einsum("ij,ij->i", d, m))
    assert np.all(dots <= 1e-10 * np.maximum(np.linalg.norm(d, axis=1), 1e-300))


# -- step_rk4 --------------------------------------------------------------------

def test_larmor_one_period():
    eng = macrospin()
    dt = T_LARMOR / 1000
    for _ in range(1000):
        step_rk4(eng, dt)
    np.testing.assert_allclose(eng.state.m[0], [1, 0, 0], rtol=0, atol=1e-8)


def test_larmor_tracks_closed_form():
    eng = macrospin()
    series = run(eng, RunConfig(dt=T_LARMOR / 400, duration=T_LARMOR / 2, record_every=10))
    w = GAMMA_LL * B
    np.testing.assert_allclose(series.mx, np.cos(w * series.t), atol=1e-8)
    np.testing.assert_allclose(series.my, np.sin(w * series.t), atol=1e-8)


def test_damped_relaxation_monotonic():
    eng = macrospin(direction=(1, 0, 0.01), alpha=0.1)
    series = run(eng, RunConfig(dt=T_LARMOR / 100, duration=20 * T_LARMOR, record_every=5))
    assert np.all(np.diff(series.mz) > 0)
    # closed form for the macrospin: tan(theta/2) decays as exp(-a gamma B t / (1 + a^2))
    th0 = math.acos(0.01 / math.sqrt(1.0001))
    rate = 0.1 * GAMMA_LL * B / (1 + 0.01)
    th = 2 * np.arctan(math.tan(th0 / 2) * np.exp(-rate * series.t))
    np.testing.assert_allclose(series.mz, np.cos(th), atol=1e-7)


def one_period_error(n):
    eng = macrospin(direction=(1, 0, 1))
    run(eng, RunConfig(dt=T_LARMOR / n, duration=T_LARMOR, renormalize_every=0))
    start = np.array([1, 0, 1]) / math.sqrt(2)
    return float(np.linalg.norm(eng.state.m[0] - start))


def test_fourth_order_convergence():
    ratio = one_period_error(40) / one_period_error(80)
    assert 16 * 0.8 <= ratio <= 16 * 1.2


def test_norm_drift_between_renormalizations():
    eng = macrospin(direction=(1, 0, 0.3))
    for _ in range(1000):
        step_rk4(eng, 1e-13, renormalize=False)
    assert eng.state.norm_drift() <= 1e-9


def test_renormalized_run_keeps_unit_norm(rng):
    eng = multi_cell(rng)
    series = run(eng, RunConfig(dt=1e-13, duration=2000e-13))
    assert series.summary["norm_drift"] <= 1e-12


def test_zeeman_energy_conserved(rng):
    mesh = Mesh(2, 2, 1, 1e-9, 1e-9, 1e-9)
    state = CellState(rng.normal(size=(4, 3)), np.full(4, 8e5))
    state.normalize()
    b = np.array([0.3, -0.2, 0.9])
    eng = Engine(mesh, state, MaterialParams(8e5), b_ext=b)

    def energy():
        return -float(np.sum(state.msat * mesh.cell_volume * (eng.state.m @ b)))

    e0 = energy()
    for _ in range(10_000):
        step_rk4(eng, 1e-13)
    assert abs(energy() - e0) <= 1e-8 * abs(e0)


def test_rhs_matches_micro_step_differences(rng):
    eng0 = multi_cell(rng, cavity=False)
    m0 = eng0.state.m.copy()
    errs = []
    for h in (1e-14, 0.5e-14):
        eng = multi_cell(np.random.default_rng(0), cavity=False)
        eng.state.m = m0.copy()
        step_rk4(eng, h, renormalize=False)
        mid = eng.state.m.copy()
        step_rk4(eng, h, renormalize=False)
        central = (eng.state.m - m0) / (2 * h)
        exact = llg_rhs(mid, eng.field(mid, h, h), eng.material)
        errs.append(np.max(np.abs(central - exact)) / np.max(np.abs(exact)))
    assert errs[0] < 1e-3
    assert errs[0] / errs[1] > 3.0  # O(h^2)


# -- run / recording -------------------------------------------------------------

def test_fencepost_and_zero_duration():
    dt = 1e-13
    s = run(macrospin(), RunConfig(dt=dt, duration=10 * dt))
    assert len(s.t) == 11 and s.t[0] == 0.0 and s.t[-1] == 10 * dt
    s = run(macrospin(), RunConfig(dt=dt, duration=0.0))
    assert len(s.t) == 1 and s.summary["steps"] == 0


def test_recorders_receive_samples():
    seen = []
    dt = 1e-13
    run(macrospin(), RunConfig(dt=dt, duration=9 * dt, record_every=3),
        [lambda t, m, g, w: seen.append((t, tuple(m), g, w))])
    assert [r[0] for r in seen] == [0.0, 3 * dt, 6 * dt, 9 * dt]
    assert all(r[2] == 0.0 and r[3] == 0.0 for r in seen)


def test_summary_fields(rng):
    s = run(multi_cell(rng), RunConfig(dt=1e-13, duration=5e-13))
    assert s.summary["steps"] == 5
    assert s.summary["cavity"] == "cavity enabled"
    assert s.summary["wall_end"] >= s.summary["wall_start"]
    assert run(macrospin(), RunConfig(1e-13, 1e-13)).summary["cavity"] == "cavity disabled"


def test_csv_roundtrip_is_exact(tmp_path, rng):
    s = run(multi_cell(rng), RunConfig(dt=1e-13, duration=50e-13, record_every=5))
    path = tmp_path / "ts.csv"
    s.write_csv(path)
    first = path.read_text().splitlines()[0]
    assert tuple(first.split(",")) == TIMESERIES_HEADER
    back = read_timeseries_csv(path)
    for a, b in ((s.t, back.t), (s.m, back.m), (s.gamma, back.gamma), (s.overlap, back.overlap)):
        assert np.asarray(a).tobytes() == np.asarray(b).tobytes()
    digits = path.read_text().splitlines()[1].split(",")[1]
    assert len(digits.split("e")[0].replace("-", "").replace(".", "")) == 17


def test_identical_runs_are_bit_identical(tmp_path):
    paths = []
    for k in range(2):
        eng = multi_cell(np.random.default_rng(7), x0=0.1)
        s = run(eng, RunConfig(dt=1e-13, duration=300e-13))
        paths.append(tmp_path / f"r{k}.csv")
        s.write_csv(paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_zero_coupling_matches_cavity_disabled():
    a = multi_cell(np.random.default_rng(3), b_rms_scale=0.0)
    b = multi_cell(np.random.default_rng(3), cavity=False)
    sa = run(a, RunConfig(dt=1e-13, duration=400e-13))
    sb = run(b, RunConfig(dt=1e-13, duration=400e-13))
    assert sa.m.tobytes() == sb.m.tobytes()
    assert a.state.m.tobytes() == b.state.m.tobytes()


def test_reset_then_run_equals_fresh_run():
    cfg = RunConfig(dt=1e-13, duration=200e-13)
    chained = multi_cell(np.random.default_rng(11), x0=0.3)
    run(chained, cfg)
    snapshot = chained.state.copy()
    chained.reset_memory()
    assert chained.gamma() == 0.3
    second = run(chained, cfg)

    fresh = multi_cell(np.random.default_rng(11), x0=0.3)
    fresh.state = snapshot
    ref = run(fresh, cfg)
    assert second.m.tobytes() == ref.m.tobytes()
    assert second.gamma.tobytes() == ref.gamma.tobytes()
    assert second.overlap.tobytes() == ref.overlap.tobytes()


# -- validation ------------------------------------------------------------------

def test_engine_and_config_validation():
    mesh = Mesh(2, 1, 1, 1e-9, 1e-9, 1e-9)
    state = CellState.uniform(mesh, 1.0)
    with pytest.raises(ConfigurationError):
        Engine(mesh, state, MaterialParams(1.0), enabled={"zeeman", "dmi"})
    with pytest.raises(ConfigurationError):
        Engine(Mesh(3, 1, 1, 1, 1, 1), state, MaterialParams(1.0))
    with pytest.raises(ConfigurationError):
        Engine(mesh, state, MaterialParams(1.0),
               cavity=CavityParams(1e9, 0.0, np.zeros((1, 3)), mesh.cell_volume))
    for bad in (dict(dt=0.0, duration=1.0), dict(dt=1.0, duration=-1.0),
                dict(dt=1.0, duration=1.0, record_every=0),
                dict(dt=1.0, duration=1.0, renormalize_every=-1)):
        with pytest.raises(ConfigurationError):
            RunConfig(**bad)
