import math

import numpy as np
import pytest

from logvisc import fields as fl
from logvisc import flow
from logvisc import scenarios
from logvisc import transport as tr
from logvisc import verification as vf
from logvisc.simulation import Simulation


def test_flow_params_validation():
    with pytest.raises(ValueError):
        flow.FlowParams(rho=0.0)
    with pytest.raises(ValueError):
        flow.FlowParams(eta=-1.0)
    with pytest.raises(ValueError):
        flow.FlowParams(kappa=-0.1)
    assert flow.FlowParams(kappa=0.0).kappa == 0.0


def test_elastic_stress_values():
    g = fl.Grid((8, 8), (1.0, 1.0))
    L = fl.TensorField.uniform(g, np.diag([1.0, -1.0]))
    st = tr.TransportState(L)
    T = flow.elastic_stress(st, 2.0, "solid")
    np.testing.assert_array_equal(T.matrices()[2, 5], np.diag([2.0, -2.0]))
    same = tr.TransportState(L.copy(), L.copy())
    assert np.abs(flow.elastic_stress(same, 3.0, "fluid").data).max() == 0.0
    rnd = tr.TransportState(vf.random_traceless_field(g, 1), vf.random_traceless_field(g, 2))
    assert np.abs(flow.elastic_stress(rnd, 5.0, "fluid").trace()).max() <= 1e-12
    with pytest.raises(ValueError):
        flow.elastic_stress(rnd, 1.0, "foam")


def test_cfl_hand_formula():
    # advective (1/32)/2 = 1/64, viscous 1/(4 * 0.5 * 1024) = 1/2048,
    # elastic (1/32) * sqrt(1/4) / 2 = 1/128; safety 0.5 -> 1/4096
    g = fl.Grid((32, 32), (1.0, 1.0))
    u = fl.VectorField.zeros(g)
    u.components[0][3, 4] = -2.0
    p = flow.FlowParams(rho=1.0, eta=0.5, kappa=4.0)
    assert flow.cfl_dt(u, p, g) == pytest.approx(1.0 / 4096, rel=1e-15)
    assert flow.cfl_dt(u, p, g, explicit_viscosity=False) == pytest.approx(0.5 / 128, rel=1e-15)
    still = flow.FlowParams(rho=1.0, eta=0.5, kappa=0.0)
    assert flow.cfl_dt(fl.VectorField.zeros(g), still, g) == pytest.approx(0.5 / 2048, rel=1e-15)
    assert flow.cfl_dt(fl.VectorField.zeros(g), still, g, explicit_viscosity=False) == math.inf


def test_cfl_advective_halves_with_resolution():
    p = flow.FlowParams(kappa=0.0)
    dts = []
    for n in (16, 32):
        g = fl.Grid((n, n), (1.0, 1.0))
        u = fl.VectorField.from_function(g, lambda x: np.broadcast_to([1.5, 0.0], x.shape))
        dts.append(flow.cfl_dt(u, p, g, explicit_viscosity=False))
    assert dts[1] == pytest.approx(dts[0] / 2, rel=1e-15)


@pytest.mark.parametrize("bc", [fl.PERIODIC, fl.WALLS])
def test_projection_is_divergence_free_and_idempotent(bc):
    g = fl.Grid((24, 20), (1.0, 0.8), bc)
    u = vf.random_face_velocity(g, 3)
    w, phi = flow.project(u)
    assert np.abs(fl.divergence(w)).max() <= 1e-8 * u.max_abs()
    assert abs(phi.mean()) <= 1e-12
    w2, _ = flow.project(w)
    np.testing.assert_allclose(w2.flat(), w.flat(), atol=1e-11)
    assert fl.l2_norm(w) <= fl.l2_norm(u)


def test_rest_with_equal_strains_stays_at_rest():
    g = fl.Grid((16, 16), (1.0, 1.0), fl.WALLS)
    L = vf.random_traceless_field(g, 4)
    st = tr.TransportState(L, L.copy())
    u, p = fl.VectorField.zeros(g), None
    params = flow.FlowParams(kappa=2.0)
    for _ in range(5):
        u, p = flow.momentum_step(u, p, st, params, 0.01, "fluid")
    assert u.max_abs() <= 1e-13


def test_momentum_step_keeps_constraints():
    cfg = vf._cfg("model=solid;scenario=rest_strained;t_end=1;velocity=0.5;nx=20;ny=20")
    s = scenarios.build(cfg)
    u, p = flow.momentum_step(s.u, None, s.state, s.params, 0.01, "solid")
    assert np.abs(fl.divergence(u)).max() <= 1e-8 * u.max_abs()
    assert np.all(u.components[0][0] == 0) and np.all(u.components[0][-1] == 0)
    assert np.all(u.components[1][:, 0] == 0) and np.all(u.components[1][:, -1] == 0)
    assert p.data.shape == s.grid.shape


def test_strained_solid_starts_moving_without_gaining_energy():
    r = Simulation(vf._cfg("model=solid;scenario=rest_strained;t_end=0.1;nx=16;ny=16")).run()
    assert r.records[0].kinetic == 0.0
    assert r.records[-1].kinetic > 0.0
    e0 = r.records[0].kinetic + r.records[0].elastic
    for rec in r.records:
        assert rec.kinetic + rec.elastic + rec.viscous_cum <= e0 * (1 + 1e-12)


def test_taylor_green_decay_rate_coarse():
    r = Simulation(vf._cfg("model=solid;scenario=taylor_green;t_end=0.2;kappa=0;dt=0.002;nx=32;ny=32")).run()
    rate = -0.5 * math.log(r.records[-1].kinetic / r.records[0].kinetic) / 0.2
    assert rate == pytest.approx(2.0, rel=0.01)


def test_per_step_energy_identity_closes():
    R, R_exact = vf.momentum_energy_defect(2.5e-4, n=16)
    assert R == pytest.approx(R_exact, rel=1e-8)
    assert R <= 0.0
