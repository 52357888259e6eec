import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logvisc import fields as fl
from logvisc import scenarios
from logvisc import tensor_core as tc
from logvisc import verification as vf


def unit_grid(n=16, bc=fl.PERIODIC):
    return fl.Grid((n, n), (1.0, 1.0), bc)


def linear_velocity(grid, A):
    return fl.VectorField.from_function(grid, lambda x: x @ np.asarray(A, dtype=float).T)


def test_grid_validation():
    with pytest.raises(ValueError):
        fl.Grid((4, 16), (1.0, 1.0))
    with pytest.raises(ValueError):
        fl.Grid((16, 16), (1.0, 0.0))
    with pytest.raises(ValueError):
        fl.Grid((16, 16), (1.0, 1.0), "slip")
    g = fl.Grid((8, 10), (2.0, 1.0), fl.WALLS)
    assert g.dx == (0.25, 0.1)
    assert g.face_shape(0) == (9, 10)
    assert g.cell_volume == pytest.approx(0.025)


# --- norms ---------------------------------------------------------------------

def test_norm_of_constant_identity():
    F = fl.TensorField.uniform(unit_grid(), np.eye(2), chart=False)
    assert fl.l2_norm(F) == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert fl.l2_norm(fl.TensorField.zeros(unit_grid())) == 0.0


def test_norm_single_cell_hand_value():
    # one cell of a [0,2]x[0,1] 8x8 grid holds diag(3, -3): sqrt(18 / 32) = 0.75
    g = fl.Grid((8, 8), (2.0, 1.0))
    M = np.zeros(g.shape + (2, 2))
    M[3, 5] = np.diag([3.0, -3.0])
    assert fl.l2_norm(fl.TensorField(g, M)) == pytest.approx(0.75, rel=1e-15)


def test_vector_norm_hand_value():
    g = fl.Grid((8, 8), (1.0, 1.0))
    u = fl.VectorField.zeros(g)
    u.components[0][:] = 2.0
    u.components[1][:] = 1.0
    assert fl.l2_norm(u) == pytest.approx(math.sqrt(5.0), rel=1e-15)


def test_compensated_sum_matches_fsum():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(10007) * 10.0 ** rng.integers(-8, 8, 10007)
    assert fl.compensated_sum(v) == pytest.approx(math.fsum(v), rel=1e-14, abs=1e-14)
    assert fl.compensated_sum(np.ones(130)) == 130.0


# --- gradients -------------------------------------------------------------------

@pytest.mark.parametrize("A", [[[0, 1], [0, 0]], [[0, -1], [1, 0]]])
def test_gradient_of_linear_velocity(A):
    g = unit_grid(16, fl.WALLS)
    G = fl.velocity_gradient(linear_velocity(g, A))
    np.testing.assert_allclose(G[2:-2, 2:-2], np.broadcast_to(A, (12, 12, 2, 2)), atol=1e-12)


def test_gradient_single_cell():
    g = unit_grid(16, fl.WALLS)
    G = fl.velocity_gradient(linear_velocity(g, [[0, 1], [0, 0]]), cell=(7, 8))
    np.testing.assert_allclose(G, [[0, 1], [0, 0]], atol=1e-12)


def _tg(grid):
    return scenarios.velocity_from_streamfunction(grid, lambda X, Y: np.sin(X) * np.sin(Y))


def _tg_gradient(x):
    # u = (sin x cos y, -cos x sin y)
    X, Y = x[..., 0], x[..., 1]
    G = np.empty(x.shape[:-1] + (2, 2))
    G[..., 0, 0] = np.cos(X) * np.cos(Y)
    G[..., 0, 1] = -np.sin(X) * np.sin(Y)
    G[..., 1, 0] = np.sin(X) * np.sin(Y)
    G[..., 1, 1] = -np.cos(X) * np.cos(Y)
    return G


def test_taylor_green_gradient_second_order():
    errs = []
    for n in (16, 32, 64):
        g = fl.Grid((n, n), (2 * math.pi, 2 * math.pi))
        G = fl.velocity_gradient(_tg(g))
        errs.append(np.abs(G - _tg_gradient(g.cell_centers())).max())
    orders = [math.log2(a / b) for a, b in zip(errs[:-1], errs[1:])]
    assert min(orders) > 1.9


def test_trace_is_discrete_divergence():
    g = unit_grid(20)
    u = vf.random_face_velocity(g, 3)
    G = fl.velocity_gradient(u)
    np.testing.assert_allclose(np.trace(G, axis1=-2, axis2=-1), fl.divergence(u), atol=1e-12)
    w = vf.random_solenoidal(g, 4)
    assert np.abs(fl.divergence(w)).max() <= 1e-8 * max(w.max_abs(), 1.0)


def test_grad_strain_identity_divergence_free():
    for bc in (fl.PERIODIC, fl.WALLS):
        g = fl.Grid((24, 16), (1.0, 0.8), bc)
        u = vf.random_solenoidal(g, 11)
        assert fl.grad_norm_sq(u) == pytest.approx(2.0 * fl.strain_norm_sq(u), rel=1e-12)


# --- tensor divergence -----------------------------------------------------------------

def test_divergence_of_constant_is_zero():
    g = unit_grid()
    F = fl.TensorField.uniform(g, np.array([[0.3, 0.1], [0.1, -0.3]]))
    div = fl.tensor_divergence(F)
    assert div.max_abs() <= 1e-13


def test_divergence_of_linear_field():
    g = unit_grid(16, fl.WALLS)
    E = np.array([[0.5, 0.2], [0.2, -0.5]])
    M = g.cell_centers()[..., 0, None, None] * E
    div = fl.tensor_divergence((g, M))
    np.testing.assert_allclose(div.components[0][2:-2, 2:-2], 0.5, atol=1e-12)
    np.testing.assert_allclose(div.components[1][2:-2, 2:-2], 0.2, atol=1e-12)


def test_divergence_manufactured_second_order():
    errs = []
    for n in (16, 32, 64):
        g = fl.Grid((n, n), (2 * math.pi, 2 * math.pi))
        x = g.cell_centers()
        M = np.zeros(g.shape + (2, 2))
        M[..., 0, 0] = np.sin(x[..., 0]) * np.cos(x[..., 1])
        M[..., 1, 1] = -M[..., 0, 0]
        M[..., 0, 1] = M[..., 1, 0] = np.cos(x[..., 0] + x[..., 1])
        div = fl.tensor_divergence((g, M))
        f0 = g.face_centers(0)
        exact0 = np.cos(f0[..., 0]) * np.cos(f0[..., 1]) - np.sin(f0[..., 0] + f0[..., 1])
        errs.append(np.abs(div.components[0] - exact0).max())
    orders = [math.log2(a / b) for a, b in zip(errs[:-1], errs[1:])]
    assert min(orders) > 1.8


@pytest.mark.parametrize("bc", [fl.PERIODIC, fl.WALLS])
def test_integration_by_parts(bc):
    g = fl.Grid((20, 18), (1.0, 0.9), bc)
    assert vf.ibp_defect(g, 21) <= 1e-12


# --- interpolation -------------------------------------------------------------------

def test_interpolation_at_centres_and_constant():
    g = unit_grid(12)
    F = vf.random_traceless_field(g, 5)
    centres = g.cell_centers()
    np.testing.assert_allclose(fl.interpolate_chart(F, centres), F.data, atol=1e-15)
    C = fl.TensorField.uniform(g, np.array([[0.4, 0.1], [0.1, -0.4]]))
    pts = np.random.default_rng(1).uniform(0, 1, (50, 2))
    expected = np.broadcast_to(tc.mat_exp_sym(C.matrices()[0, 0]), (50, 2, 2))
    np.testing.assert_allclose(fl.interpolate_tensor(C, pts), expected, rtol=1e-14)


def test_interpolation_reproduces_linear_chart():
    g = unit_grid(12, fl.WALLS)
    x = g.cell_centers()
    E1, E2 = np.array([[1.0, 0.2], [0.2, -1.0]]), np.array([[-0.1, 0.5], [0.5, 0.1]])
    M = x[..., 0, None, None] * E1 + x[..., 1, None, None] * E2
    F = fl.TensorField(g, M)
    pts = np.random.default_rng(2).uniform(0.1, 0.9, (40, 2))
    exact = pts[:, 0, None, None] * E1 + pts[:, 1, None, None] * E2
    np.testing.assert_allclose(tc.unpack(fl.interpolate_chart(F, pts)), exact, atol=1e-14)


def test_interpolated_tensor_is_unimodular():
    g = unit_grid(12)
    F = vf.random_traceless_field(g, 6, amplitude=2.0)
    T = fl.interpolate_tensor(F, np.array([0.37, 0.81]))
    assert isinstance(T, tc.SymTensor)
    assert abs(tc.det(T.matrix()) - 1.0) <= 1e-12
    assert np.linalg.eigvalsh(T.matrix()).min() > 0


def test_velocity_interpolation_of_uniform_flow():
    g = unit_grid(12)
    u = fl.VectorField.from_function(g, lambda x: np.broadcast_to([0.3, -0.2], x.shape))
    pts = np.random.default_rng(3).uniform(-1, 2, (30, 2))
    np.testing.assert_allclose(fl.interpolate_velocity(u, pts), np.broadcast_to([0.3, -0.2], (30, 2)), atol=1e-15)


# --- mollification ----------------------------------------------------------------

def _direct_gaussian(data, sigma):
    # periodic convolution with the truncated, normalized kernel used by the filter
    radius = int(4.0 * sigma + 0.5)
    k = np.arange(-radius, radius + 1)
    w = np.exp(-0.5 * (k / sigma) ** 2)
    w /= w.sum()
    out = data
    for axis in (0, 1):
        out = sum(wi * np.roll(out, ki, axis=axis) for wi, ki in zip(w, k))
    return out


def test_mollify_identity_and_constant():
    g = unit_grid()
    F = vf.random_traceless_field(g, 7)
    np.testing.assert_array_equal(fl.mollify_log_field(F, 0.0).data, F.data)
    C = fl.TensorField.uniform(g, np.array([[0.4, 0.1], [0.1, -0.4]]))
    np.testing.assert_allclose(fl.mollify_log_field(C, 2.0).data, C.data, atol=1e-15)
    with pytest.raises(ValueError):
        fl.mollify_log_field(F, -1.0)


def test_mollify_bump_against_direct_convolution():
    g = fl.Grid((32, 32), (1.0, 1.0))
    M = np.zeros(g.shape + (2, 2))
    M[10, 20] = np.array([[1.0, 0.5], [0.5, -1.0]])
    F = fl.TensorField(g, M)
    out = fl.mollify_log_field(F, 2.0)
    ref = np.stack([_direct_gaussian(F.data[..., k], 2.0) for k in range(3)], axis=-1)
    np.testing.assert_allclose(out.data, ref, atol=1e-15)
    assert fl.l2_norm(out) <= fl.l2_norm(F)
    assert out.data[10, 20, 0] < 1.0 and out.data[12, 20, 0] > 0.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.3, 4.0))
def test_mollify_contracts_and_stays_traceless(seed, scale):
    g = fl.Grid((16, 16), (1.0, 1.0))
    F = vf.random_traceless_field(g, seed, smooth=0.0)
    out = fl.mollify_log_field(F, scale)
    assert fl.l2_norm(out) <= fl.l2_norm(F) + 1e-12
    assert np.abs(out.trace()).max() <= 1e-14


# --- snapshots ------------------------------------------------------------------------

def test_snapshot_round_trip(tmp_path):
    g = fl.Grid((8, 12), (1.0, 1.5), fl.WALLS)
    F = vf.random_traceless_field(g, 8)
    u = vf.random_face_velocity(g, 9)
    p = fl.ScalarField(g, np.arange(96.0).reshape(8, 12))
    for name, obj in (("L", F), ("u", u), ("p", p)):
        fl.write_snapshot(tmp_path / name, obj)
    np.testing.assert_array_equal(fl.read_snapshot(tmp_path / "L", g).data, F.data)
    np.testing.assert_array_equal(fl.read_snapshot(tmp_path / "u", g).flat(), u.flat())
    np.testing.assert_array_equal(fl.read_snapshot(tmp_path / "p", g).data, p.data)
    with pytest.raises(ValueError):
        fl.read_snapshot(tmp_path / "L", fl.Grid((8, 8), (1.0, 1.0)))
