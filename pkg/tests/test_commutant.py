import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logvisc import commutant as cm
from logvisc import tensor_core as tc
from logvisc import verification as vf
from logvisc.errors import DegenerateSplit
from logvisc.rng import Lcg64

SHEAR = np.array([[0.0, 1.0], [0.0, 0.0]])


def gram(frame):
    Z = frame.basis
    return np.einsum("kab,lab->kl", Z, Z)


@pytest.mark.parametrize("B, dim", [
    (np.eye(2), 3),
    (np.diag([4.0, 0.25]), 2),
    (np.diag([2.0, 2.0, 0.25]), 4),
    (np.eye(3), 6),
    (np.diag([3.0, 1.0, 1.0 / 3.0]), 3),
])
def test_commutant_dimension(B, dim):
    frame = cm.build_frame(B)
    assert frame.dim == dim
    assert len(frame.basis) == B.shape[0] ** 2
    np.testing.assert_allclose(gram(frame), np.eye(B.shape[0] ** 2), atol=1e-12)
    assert set(frame.commutant_indices).isdisjoint(frame.complement_indices)


def test_commutant_elements_commute():
    B = np.diag([2.0, 2.0, 0.25])
    frame = cm.build_frame(B)
    for k in frame.commutant_indices:
        Z = frame.basis[k]
        np.testing.assert_allclose(Z, Z.T, atol=1e-15)
        np.testing.assert_allclose(Z @ B, B @ Z, atol=1e-14)


def test_q_for_identity_is_antisymmetric_part():
    G = np.array([[1.0, 2.0], [-0.5, 3.0]])
    np.testing.assert_allclose(cm.project_Q(np.eye(2), G), tc.skew(G), atol=1e-15)


def test_q_vanishes_on_polynomials_of_b():
    B = vf.random_spd(Lcg64(1), 3, 1, min_gap=0.1)[0]
    G = 2.0 * B @ B - B + 3.0 * np.eye(3)
    assert np.abs(cm.project_Q(B, G)).max() <= 1e-12


def test_q_of_shear_on_diagonal_b():
    np.testing.assert_allclose(cm.project_Q(np.diag([4.0, 0.25]), SHEAR), SHEAR, atol=1e-15)


def test_decompose_shear_hand_solution():
    # k12 = -(b1/b2) k21 = -16 k21 and Omega + K = G give omega = -1/15
    Om, K, S = cm.decompose_grad(np.diag([4.0, 0.25]), SHEAR)
    np.testing.assert_allclose(Om, [[0.0, -1 / 15], [1 / 15, 0.0]], atol=1e-15)
    np.testing.assert_allclose(K, [[0.0, 16 / 15], [-1 / 15, 0.0]], atol=1e-15)
    np.testing.assert_allclose(S, np.zeros((2, 2)), atol=1e-15)


def test_decompose_pure_rotation():
    W = np.array([[0.0, 0.7], [-0.7, 0.0]])
    Om, K, S = cm.decompose_grad(np.diag([4.0, 0.25]), W)
    np.testing.assert_allclose(Om, W, atol=1e-15)
    np.testing.assert_allclose(K, 0.0, atol=1e-15)
    np.testing.assert_allclose(S, 0.0, atol=1e-15)


def test_decompose_commuting_symmetric():
    B = np.diag([4.0, 1.0, 0.25])
    G = np.diag([0.3, -0.1, -0.2])
    Om, K, S = cm.decompose_grad(B, G)
    np.testing.assert_allclose(Om, 0.0, atol=1e-15)
    np.testing.assert_allclose(K, 0.0, atol=1e-15)
    np.testing.assert_allclose(S, G, atol=1e-15)


def test_degenerate_split_raises_but_q_is_defined():
    B = np.diag([2.0, 2.0, 0.25])
    G = Lcg64(3).general(3, 1)[0]
    with pytest.raises(DegenerateSplit):
        cm.decompose_grad(B, G)
    Q = cm.project_Q(B, G)
    assert np.isfinite(Q).all()
    np.testing.assert_allclose(Q, cm.complement_via_parametrization(B, G), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([2, 3]))
def test_decomposition_properties(seed, d):
    gen = Lcg64(seed)
    B = vf.random_spd(gen, d, 1, -1.0, 1.0, min_gap=1e-2)[0]
    G = gen.general(d, 1)[0]
    frame = cm.build_frame(B)
    Q = cm.project_Q(B, G)
    for k in frame.commutant_indices:
        assert abs(tc.inner(Q, frame.basis[k])) <= 1e-12
    assert tc.frobenius(Q) <= tc.frobenius(G) + 1e-12
    Om, K, S = cm.decompose_grad(B, G)
    np.testing.assert_allclose(Om + K + S, G, atol=1e-12)
    np.testing.assert_allclose(Om + K, Q, atol=1e-12)
    np.testing.assert_allclose(Om, -Om.T, atol=0)
    np.testing.assert_allclose(K @ B + B @ K.T, 0.0, atol=1e-10)
    np.testing.assert_allclose(S @ B, B @ S, atol=1e-12)
    np.testing.assert_allclose(Q, cm.complement_via_parametrization(B, G), atol=1e-11)


def test_q_trace_free():
    gen = Lcg64(8)
    B = vf.random_spd(gen, 3, 200)
    G = gen.general(3, 200)
    Q = cm.project_Q(B, G)
    assert np.abs(np.trace(Q, axis1=-2, axis2=-1)).max() <= 1e-13


def test_q_flow_keeps_eigenvalues_to_second_order():
    B = vf.random_spd(Lcg64(4), 3, 1, min_gap=0.2)[0]
    G = Lcg64(5).general(3, 1)[0]
    Q = cm.project_Q(B, G)
    lam0 = tc.eig_sym(B).eigenvalues
    errs = []
    for h in (0.01, 0.005):
        E = tc.mat_exp_general(h * Q)
        errs.append(np.abs(tc.eig_sym(E @ B @ E.T).eigenvalues - lam0).max())
    assert np.log2(errs[0] / errs[1]) > 1.9
