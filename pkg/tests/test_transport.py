import math

import numpy as np
import pytest

from logvisc import commutant as cm
from logvisc import fields as fl
from logvisc import tensor_core as tc
from logvisc import transport as tr
from logvisc import verification as vf

GRID = fl.Grid((8, 8), (1.0, 1.0))


def uniform_flow(grid, G):
    """Linear velocity about the box centre with its exact gradient attached."""
    G = np.asarray(G, dtype=float)
    c = np.array(grid.lengths) / 2.0
    return fl.VectorField.from_function(grid, lambda x: (x - c) @ G.T, exact_gradient=G)


def uniform_state(L, L_ref=None, F=None, grid=GRID):
    Lf = fl.TensorField.uniform(grid, L)
    Lr = None if L_ref is None else fl.TensorField.uniform(grid, L_ref)
    if F is not None:
        F = np.broadcast_to(F, grid.shape + F.shape).copy()
    return tr.TransportState(Lf, Lr, F)


def smooth_chart(grid):
    x = grid.cell_centers()
    M = np.zeros(grid.shape + (2, 2))
    M[..., 0, 0] = 0.4 * np.sin(2 * math.pi * x[..., 0]) * np.cos(2 * math.pi * x[..., 1])
    M[..., 1, 1] = -M[..., 0, 0]
    M[..., 0, 1] = M[..., 1, 0] = 0.2 * np.cos(2 * math.pi * (x[..., 0] - x[..., 1]))
    return M


# --- advection -----------------------------------------------------------------------

def test_advection_trivial_cases():
    g = fl.Grid((16, 16), (1.0, 1.0))
    F = vf.random_traceless_field(g, 1)
    out = tr.advect_semi_lagrangian(F, fl.VectorField.zeros(g), 0.1)
    np.testing.assert_array_equal(out.data, F.data)
    C = fl.TensorField.uniform(g, np.array([[0.3, 0.2], [0.2, -0.3]]))
    moved = tr.advect_semi_lagrangian(C, vf.random_solenoidal(g, 2), 0.01)
    np.testing.assert_allclose(moved.data, C.data, atol=1e-15)


def test_advection_shift_second_order():
    errs = []
    c = 0.7
    for n in (16, 32, 64):
        g = fl.Grid((n, n), (1.0, 1.0))
        u = fl.VectorField.from_function(g, lambda x: np.broadcast_to([c, 0.0], x.shape))
        dt = 0.4 * g.dx[0] / c
        x = g.cell_centers()
        out = tr.advect_semi_lagrangian(fl.TensorField(g, smooth_chart(g)), u, dt)
        # exact solution: the initial field evaluated at x - c dt
        xs = x.copy()
        xs[..., 0] -= c * dt
        M = np.zeros(g.shape + (2, 2))
        M[..., 0, 0] = 0.4 * np.sin(2 * math.pi * xs[..., 0]) * np.cos(2 * math.pi * xs[..., 1])
        M[..., 1, 1] = -M[..., 0, 0]
        M[..., 0, 1] = M[..., 1, 0] = 0.2 * np.cos(2 * math.pi * (xs[..., 0] - xs[..., 1]))
        errs.append(np.abs(out.matrices() - M).max())
    orders = [math.log2(a / b) for a, b in zip(errs[:-1], errs[1:])]
    assert min(orders) > 1.8


def test_backtrace_uniform_flow_is_exact():
    g = fl.Grid((16, 16), (1.0, 1.0))
    u = fl.VectorField.from_function(g, lambda x: np.broadcast_to([0.3, -0.1], x.shape))
    pts = g.cell_centers()
    np.testing.assert_allclose(tr.backtrace(u, pts, 0.5), pts - 0.5 * np.array([0.3, -0.1]), atol=1e-15)


# --- B transport --------------------------------------------------------------------------

def test_step_b_rigid_rotation_closed_form():
    w = 1.3
    W = np.array([[0.0, -w], [w, 0.0]])
    L0 = np.diag([math.log(4), -math.log(4)])
    st = uniform_state(L0)
    u = uniform_flow(GRID, W)
    dt, n = 0.01, 100
    for _ in range(n):
        st = tr.step_B(st, u, dt)
    t = n * dt
    R = np.array([[math.cos(w * t), -math.sin(w * t)], [math.sin(w * t), math.cos(w * t)]])
    exact = R @ np.diag([4.0, 0.25]) @ R.T
    np.testing.assert_allclose(st.B(), np.broadcast_to(exact, st.B().shape), atol=1e-12)
    np.testing.assert_allclose(tc.eig_sym(st.B()).eigenvalues[0, 0], [4.0, 0.25], atol=1e-10)


def test_step_b_simple_shear_closed_form():
    rate = 0.8
    u = uniform_flow(GRID, [[0.0, rate], [0.0, 0.0]])
    st = uniform_state(np.zeros((2, 2)), F=np.eye(2))
    dt, n = 0.01, 125
    for _ in range(n):
        st = tr.step_B(st, u, dt)
    g = rate * n * dt
    np.testing.assert_allclose(st.B()[3, 4], [[1 + g * g, g], [g, 1.0]], atol=1e-12)
    np.testing.assert_allclose(st.F[3, 4], [[1.0, g], [0.0, 1.0]], atol=1e-13)
    FFt = st.F @ tc.transpose(st.F)
    assert np.abs(FFt - st.B()).max() <= 1e-12
    assert tr.det_error(st) <= 1e-12


def test_step_f_alone_matches_closed_form():
    u = uniform_flow(GRID, [[0.0, 0.5], [0.0, 0.0]])
    st = uniform_state(np.zeros((2, 2)), F=np.eye(2))
    for _ in range(40):
        st = tr.step_F(st, u, 0.05)
    np.testing.assert_allclose(st.F[0, 0], [[1.0, 1.0], [0.0, 1.0]], atol=1e-14)
    np.testing.assert_allclose(st.L.data, 0.0)


def test_det_preserved_on_solenoidal_flow():
    g = fl.Grid((24, 24), (1.0, 1.0))
    st = tr.TransportState(vf.random_traceless_field(g, 3, amplitude=1.0))
    u = vf.random_solenoidal(g, 4)
    for _ in range(10):
        st = tr.step_B(st, u, 0.2 * g.dx[0] / u.max_abs())
    assert tr.det_error(st) <= 1e-10
    assert np.abs(st.L.trace()).max() <= 1e-12


# --- B_ref transport ------------------------------------------------------------------------

def test_relaxation_rate_formula():
    dt, tau = 0.01, 0.5
    assert tr.relaxation_rate(dt, tau) == pytest.approx((1 - math.exp(-2 * dt / tau)) / (2 * dt), rel=1e-15)
    assert tr.relaxation_rate(0.0, tau) == 2.0


def test_bref_fixed_when_strains_agree():
    L = np.diag([0.5, -0.5])
    st = uniform_state(L, L_ref=L)
    u = uniform_flow(GRID, np.diag([0.3, -0.3]))
    out = tr.step_Bref(st, u, 0.05, 1.0)
    np.testing.assert_allclose(out.L_ref.data, st.L_ref.data, atol=1e-15)


def test_relaxation_closed_form():
    # log B_ref(1) = (1 - e^-2) diag(1, -1) = diag(0.864664..., -0.864664...)
    st = uniform_state(np.diag([1.0, -1.0]), L_ref=np.zeros((2, 2)))
    u = fl.VectorField.zeros(GRID)
    for _ in range(1000):
        st = tr.step_Bref(st, u, 1e-3, 1.0)
    expected = (1 - math.exp(-2.0)) * np.diag([1.0, -1.0])
    assert 1 - math.exp(-2.0) == pytest.approx(0.8646647167633873, rel=1e-15)
    rel = np.abs(st.L_ref.matrices() - expected).max() / math.sqrt(2.0)
    assert rel <= 1e-6
    np.testing.assert_array_equal(st.L.matrices()[0, 0], np.diag([1.0, -1.0]))


def test_rotation_keeps_strains_equal():
    W = np.array([[0.0, -2.0], [2.0, 0.0]])
    L0 = np.array([[0.6, 0.3], [0.3, -0.6]])
    st = uniform_state(L0, L_ref=L0)
    u = uniform_flow(GRID, W)
    for _ in range(50):
        st = tr.step_transport(st, u, 0.01, 1.0)
    assert np.abs(st.log_difference()).max() <= 1e-8


def test_step_bref_requires_reference():
    with pytest.raises(ValueError):
        tr.step_Bref(uniform_state(np.zeros((2, 2))), fl.VectorField.zeros(GRID), 0.1, 1.0)


# --- objective rates --------------------------------------------------------------------------

def test_corotational_rate_of_identity_is_zero():
    g = fl.Grid((16, 16), (1.0, 1.0))
    I = fl.TensorField.zeros(g)
    u = vf.random_solenoidal(g, 5)
    res = tr.objective_rate_residual(tr.RateKind.COROTATIONAL, I, I, u, 0.01)
    assert np.abs(res.data).max() <= 1e-14


def test_rate_relation_upper_equals_corotational_minus_ad_plus_da():
    gen = vf.Lcg64(6)
    A = vf.random_spd(gen, 3, 50)
    G = gen.general(3, 50)
    D = tc.sym(G)
    up = tr.rate_terms(tr.RateKind.UPPER_CONVECTED, A, G)
    co = tr.rate_terms(tr.RateKind.COROTATIONAL, A, G)
    np.testing.assert_allclose(up, co - (A @ D + D @ A), atol=1e-13)
    lo = tr.rate_terms(tr.RateKind.LOWER_CONVECTED, A, G)
    np.testing.assert_allclose(lo, co + (A @ D + D @ A), atol=1e-13)


def test_upper_convected_residual_of_exact_transport():
    u = uniform_flow(GRID, [[0.0, 1.0], [0.0, 0.0]])
    st = uniform_state(np.array([[0.2, 0.1], [0.1, -0.2]]))
    res = []
    for dt in (0.02, 0.01):
        new = tr.step_B(st, u, dt)
        r = tr.objective_rate_residual(tr.RateKind.UPPER_CONVECTED, st.L, new.L, u, dt)
        res.append(fl.l2_norm(r))
    # B(t) is quadratic in t under simple shear, so the midpoint difference is exact
    assert max(res) <= 1e-12


def test_log_evolution_residual():
    st = uniform_state(np.diag([math.log(4), -math.log(4)]))
    zero = fl.VectorField.zeros(GRID)
    rep = tr.log_evolution_residual(st, tr.step_B(st, zero, 0.1), zero, 0.1)
    assert rep.l2 == 0.0 and rep.skipped == 0
    u = uniform_flow(GRID, [[0.0, -1.0], [1.0, 0.0]])
    errs = []
    for dt in (0.02, 0.01):
        rep = tr.log_evolution_residual(st, tr.step_B(st, u, dt), u, dt)
        errs.append(rep.l2)
    assert errs[1] < errs[0] and errs[1] <= 1e-3


def test_log_evolution_skips_degenerate_cells():
    st = uniform_state(np.zeros((2, 2)))
    u = uniform_flow(GRID, [[0.0, 1.0], [0.0, 0.0]])
    rep = tr.log_evolution_residual(st, st.copy(), u, 0.001)
    assert rep.skipped == GRID.ncells


def test_commutator_norm_and_det_error():
    st = uniform_state(np.diag([0.5, -0.5]), L_ref=np.array([[0.0, 0.4], [0.4, 0.0]]))
    B, Br = st.B()[0, 0], st.B_ref()[0, 0]
    assert tr.commutator_norm(st) == pytest.approx(np.linalg.norm(B @ Br - Br @ B), rel=1e-14)
    assert tr.det_error(st) <= 1e-14
    assert tr.commutator_norm(uniform_state(np.zeros((2, 2)))) == 0.0


def test_q_generator_is_traceless_on_fields():
    g = fl.Grid((12, 12), (1.0, 1.0))
    st = tr.TransportState(vf.random_traceless_field(g, 7))
    G = fl.velocity_gradient(vf.random_solenoidal(g, 8))
    Q = cm.project_Q(st.B(), G)
    assert np.abs(np.trace(Q, axis1=-2, axis2=-1)).max() <= 1e-12
