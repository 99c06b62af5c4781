import csv
import io
import math

import numpy as np
import pytest

from hermite_stokes import evolution as ev
from hermite_stokes.dissipativity import ForceModel, compute_thresholds
from hermite_stokes.evolution import (
    BlowUpError,
    InitialData,
    SimConfig,
    detect_regularity,
    evolve,
    load_checkpoint,
    rows_to_csv,
)
from hermite_stokes.field import random_field

from conftest import convergence_orders, make_params


@pytest.fixture(scope="module")
def params8_f0(cache8):
    return make_params(cache8, gamma=0.0)


def test_config_validation():
    for kw in (dict(dt=0), dict(dt=0.1, t_end=0.01), dict(scheme="euler"), dict(diagnostics_every=0),
               dict(checkpoint_every=-1), dict(nu=0), dict(epsilon=0.5)):
        with pytest.raises(ValueError):
            SimConfig(**kw)
    cfg = SimConfig(dt=1e-3, t_end=1.0)
    assert cfg.n_steps == 1000
    from hermite_stokes.space import get_space

    assert cfg.stiffness(get_space(8)) == pytest.approx(1e-3 * get_space(8).ksq.max())


def test_zero_fixed_point():
    cfg = SimConfig(n_modes=6, dt=1e-2, t_end=0.5, u0=InitialData("zero"), diagnostics_every=5)
    res = evolve(cfg)
    assert np.all(res.final.coeffs == 0)
    assert all(r.norm_H == 0 and r.norm_V == 0 and r.energy_flux == 0 for r in res.rows)
    assert detect_regularity(res.rows)["claim"] == "zero solution"


def test_energy_decay_in_ball(params8_f0):
    cfg = SimConfig(n_modes=8, dt=1e-3, t_end=0.3, diagnostics_every=10, u0=InitialData(seed=3))
    res = evolve(cfg, params8_f0)
    nh = np.array([r.norm_H for r in res.rows])
    assert np.all(np.diff(nh) < 0)
    assert all(r.in_ball for r in res.rows)
    assert all(r.energy_flux < 0 for r in res.rows)
    assert max(r.div_residual for r in res.rows) <= 1e-8
    v = detect_regularity(res.rows, params8_f0)
    assert v["regular"] and v["stayed_in_ball"] and v["norm_V_growth"] <= 2.0
    assert v["max_ball_ratio"] == pytest.approx(0.9, rel=1e-12)


def test_linear_regime_matches_heat_oracle(space8, params8_f0):
    # in-ball data shrunk by 1e-6: the quadratic term sits far below the tolerance
    u0 = ev.initial_state(SimConfig(u0=InitialData(seed=2, scale=1e-6)), space8, params8_f0.u_plus)
    cfg = SimConfig(n_modes=8, dt=1e-3, t_end=0.1, diagnostics_every=100)
    res = evolve(cfg, u0=u0)
    oracle = space8.leray(space8.heat(u0, 0.1, 1.0))
    assert np.linalg.norm(res.final.coeffs - oracle) <= 1e-8 * np.linalg.norm(oracle)


def test_heat_only_step_is_multiplier(space6):
    u0 = random_field(4, space6).coeffs
    c = ev.step_strang(space6, u0, 0.0, 0.01, 0.5, ForceModel(), nonlinear=False)
    ref = space6.leray(space6.heat(space6.heat(u0, 0.005, 0.5), 0.005, 0.5))
    np.testing.assert_allclose(c, ref, atol=1e-15)


def test_heat_multiplier_semigroup_defect(space8):
    # the k-grid multiplier is exact per node; composing through analysis and synthesis
    # is a semigroup only up to quadrature, which stays far below the run tolerances
    u = random_field(0, space8).coeffs
    once = space8.heat(u, 0.2, 1.0)
    twice = space8.heat(space8.heat(u, 0.1, 1.0), 0.1, 1.0)
    assert np.linalg.norm(once - twice) <= 1e-10 * np.linalg.norm(once)


def test_self_convergence_order():
    orders, errs = convergence_orders(levels=3)
    assert all(1.8 <= p <= 2.2 for p in orders), orders


def test_imex_first_order(space6):
    u0 = random_field(1, space6, decay_rate=2.0).coeffs
    u0 = u0 / space6.stokes_norm(u0, 1.0)
    finals = []
    for k in range(4):
        cfg = SimConfig(n_modes=6, dt=0.02 / 2**k, t_end=0.2, diagnostics_every=10**6,
                        scheme="imex_euler", force=ForceModel("constant", 0.5))
        finals.append(evolve(cfg, u0=u0).final.coeffs)
    e = [np.linalg.norm(f - finals[-1]) for f in finals[:-1]]
    assert 0.7 <= math.log2(e[0] / e[1]) <= 1.3


def test_energy_identity_per_step(space6):
    u0 = random_field(5, space6).coeffs
    u0 = 0.1 * u0 / space6.stokes_norm(u0, 1.0)
    resid = []
    for dt in (2e-3, 1e-3):
        res = evolve(SimConfig(n_modes=6, dt=dt, t_end=0.02, diagnostics_every=1), u0=u0)
        e = np.array([0.5 * r.norm_H**2 for r in res.rows])
        d = np.array([r.norm_V**2 for r in res.rows])
        # trapezoidal dissipation over each step
        r = np.abs(np.diff(e) / dt + 0.5 * (d[1:] + d[:-1]))
        resid.append(r.max() / d[0])
    assert resid[1] < resid[0]
    assert 3.0 <= resid[0] / resid[1] <= 5.0


def test_determinism_and_csv(tmp_path, params8_f0):
    cfg = SimConfig(n_modes=6, dt=1e-3, t_end=0.05, diagnostics_every=5, u0=InitialData(seed=9))
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        evolve(cfg, params8_f0, out_dir=str(tmp_path / name))
    a = (tmp_path / "a" / "diagnostics.csv").read_bytes()
    assert a == (tmp_path / "b" / "diagnostics.csv").read_bytes()
    rows = list(csv.reader(io.StringIO(a.decode())))
    assert rows[0] == ev.DIAG_COLUMNS and len(rows) == 12
    assert [float(r[0]) for r in rows[1:]] == sorted(float(r[0]) for r in rows[1:])


def test_resume_bit_identical(tmp_path):
    force = ForceModel("hoelder", 0.2, theta=0.5, d_lip=1.0)
    cfg = SimConfig(n_modes=6, dt=1e-3, t_end=0.06, diagnostics_every=5, checkpoint_every=20,
                    force=force, u0=InitialData(seed=2))
    full = evolve(cfg, out_dir=str(tmp_path))
    assert [p.rsplit("/", 1)[1] for p in full.checkpoints] == [
        "ck_00000020.hsf", "ck_00000040.hsf", "ck_00000060.hsf"]
    ck = full.checkpoints[0]
    c, step, _ = load_checkpoint(ck)
    assert step == 20
    rest = evolve(cfg, resume=ck)
    np.testing.assert_array_equal(rest.final.coeffs, full.final.coeffs)
    tail = [r for r in full.rows if r.t > 0.02 + 1e-12]
    assert rows_to_csv(rest.rows) == rows_to_csv(tail)
    from hermite_stokes.space import get_space

    with pytest.raises(ValueError):
        load_checkpoint(ck, get_space(5))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blow_up_non_finite(space6):
    u0 = random_field(0, space6).coeffs * 1e200
    with pytest.raises(BlowUpError) as ei:
        evolve(SimConfig(n_modes=6, dt=1e-2, t_end=1.0), u0=u0)
    err = ei.value
    assert err.step >= 0 and np.all(np.isfinite(err.state.coeffs))
    assert err.t == pytest.approx(err.step * 1e-2)


def test_blow_up_growth_threshold(space6, monkeypatch):
    monkeypatch.setattr(ev, "BLOWUP_FACTOR", 1.5)
    u0 = random_field(0, space6).coeffs * 1e-3
    with pytest.raises(BlowUpError, match="blow-up"):
        evolve(SimConfig(n_modes=6, dt=1e-2, t_end=5.0, force=ForceModel("constant", 1.0)), u0=u0)


def test_out_of_regime_verdict(cache8, params8_f0):
    p = params8_f0
    bad = compute_thresholds(1e-3, 1.0, p.c, p.a, p.lambda1, p.lambda0, 0.25)
    assert bad.regime == "rejected"
    res = evolve(SimConfig(n_modes=6, dt=1e-3, t_end=0.01), bad)
    v = detect_regularity(res.rows, bad)
    assert v["regular"] is None and v["claim"].startswith("out of regime")
    assert not v["in_regime"]
    assert detect_regularity([], bad, blew_up=True)["blow_up"]


def test_checkpoint_initial_data(tmp_path, space6):
    u = random_field(3, space6).coeffs
    p = tmp_path / "u.hsf"
    ev.save_checkpoint(p, space6, u, 0, 0.0, float(np.linalg.norm(u)))
    cfg = SimConfig(n_modes=6, u0=InitialData("checkpoint", path=str(p), scale=2.0))
    np.testing.assert_array_equal(ev.initial_state(cfg, space6), 2 * u)
    with pytest.raises(ValueError):
        ev.initial_state(SimConfig(u0=InitialData("mystery")), space6)
