"""
Eigenframe tensor basis of an SPD tensor ``B``, the commutant of ``B`` among
symmetric tensors, and the split of a velocity gradient into a part that
rotates the eigenvectors of ``B`` and a part that stretches it.

All routines are batched over leading axes and work in the eigenframe,
``G~ = R^T G R``, where the commutant consists of the diagonal and the
symmetric entries inside each eigenvalue cluster.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .errors import DegenerateSplit


@dataclass
class CommutantFrame:
    """
    Orthonormal tensor basis built from the eigenvectors of ``B``.

    Attributes
    ----------
    decomp : SpectralDecomp
    basis : ndarray, shape (d*d, d, d)
        Dyads ``r_i r_i^T`` first, then for each pair ``i < j`` the
        symmetric and antisymmetric combinations scaled by ``1/sqrt(2)``.
    labels : list of str
        ``("dyad", i, i)``, ``("sym", i, j)`` or ``("skew", i, j)`` per element.
    commutant_indices : tuple of int
        Basis elements spanning the symmetric tensors that commute with ``B``.
    """

    decomp: tc.SpectralDecomp
    basis: np.ndarray
    labels: list
    commutant_indices: tuple

    @property
    def dim(self) -> int:
        return len(self.commutant_indices)

    @property
    def complement_indices(self) -> tuple:
        return tuple(k for k in range(len(self.basis)) if k not in self.commutant_indices)


def build_frame(B) -> CommutantFrame:
    """Basis and commutant of a single SPD tensor ``B``."""
    M = tc._as_matrix(B)
    if M.ndim != 2:
        raise ValueError("build_frame expects a single tensor")
    dec = tc.eig_sym(M)
    R = dec.eigenvectors
    d = M.shape[0]
    basis, labels = [], []
    for i in range(d):
        basis.append(np.outer(R[:, i], R[:, i]))
        labels.append(("dyad", i, i))
    s = 1.0 / math.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            a, b = np.outer(R[:, i], R[:, j]), np.outer(R[:, j], R[:, i])
            basis.append(s * (a + b))
            labels.append(("sym", i, j))
            basis.append(s * (a - b))
            labels.append(("skew", i, j))
    comm = tuple(k for k, (kind, i, j) in enumerate(labels)
                 if kind == "dyad" or (kind == "sym" and dec.labels[i] == dec.labels[j]))
    return CommutantFrame(dec, np.array(basis), labels, comm)


def commutant_dimension(B) -> int:
    return build_frame(B).dim


def _frame(B, decomp):
    dec = tc.eig_sym(B) if decomp is None else decomp
    return dec, dec.eigenvectors


def project_Q(B, G, decomp: tc.SpectralDecomp | None = None) -> np.ndarray:
    """
    Component of ``G`` orthogonal to the symmetric tensors commuting with ``B``.

    Parameters
    ----------
    B : array_like (..., d, d)
        SPD tensors.
    G : array_like (..., d, d)
        Full tensors, e.g. velocity gradients.
    decomp : SpectralDecomp, optional
        Precomputed decomposition of ``B``.
    """
    dec, R = _frame(B, decomp)
    G = np.asarray(G, dtype=float)
    Gt = tc.transpose(R) @ G @ R
    Qt = Gt - tc.sym(Gt) * dec.same_cluster()
    return R @ Qt @ tc.transpose(R)


def commutant_part(B, G, decomp: tc.SpectralDecomp | None = None) -> np.ndarray:
    """Orthogonal projection of ``G`` onto the commutant of ``B`` (the ``S`` part)."""
    dec, R = _frame(B, decomp)
    G = np.asarray(G, dtype=float)
    Gt = tc.transpose(R) @ G @ R
    St = tc.sym(Gt) * dec.same_cluster()
    return tc.sym(R @ St @ tc.transpose(R))


def decompose_grad(B, G, decomp: tc.SpectralDecomp | None = None):
    """
    Split ``G = Omega + K + S``.

    ``S`` is symmetric and commutes with ``B``, ``Omega`` is antisymmetric and
    ``K`` satisfies ``K B + B K^T = 0``.  ``Omega + K`` equals
    :func:`project_Q`.  In the eigenframe, for each pair ``i < j`` the
    unknowns are ``omega = Omega_ij`` and ``k = K_ji`` with
    ``K_ij = -(b_i / b_j) k``.

    Raises
    ------
    DegenerateSplit
        If two eigenvalues of some ``B`` fall in one cluster.
    """
    dec, R = _frame(B, decomp)
    if np.any(dec.labels[..., 1:] == dec.labels[..., :-1]):
        raise DegenerateSplit("rotation/stretch split is not unique for repeated eigenvalues of B")
    G = np.asarray(G, dtype=float)
    d = G.shape[-1]
    b = dec.eigenvalues
    Gt = tc.transpose(R) @ G @ R
    St = np.zeros_like(Gt)
    Om = np.zeros_like(Gt)
    Kt = np.zeros_like(Gt)
    for i in range(d):
        St[..., i, i] = Gt[..., i, i]
    for i in range(d):
        for j in range(i + 1, d):
            qij, qji = Gt[..., i, j], Gt[..., j, i]
            bi, bj = b[..., i], b[..., j]
            k = bj * (qij + qji) / (bj - bi)
            Kt[..., j, i] = k
            Kt[..., i, j] = -(bi / bj) * k
            w = qij + (bi / bj) * k
            Om[..., i, j] = w
            Om[..., j, i] = -w
    Rt = tc.transpose(R)
    Omega = R @ Om @ Rt
    K = R @ Kt @ Rt
    S = R @ St @ Rt
    return tc.skew(Omega), K, tc.sym(S)


def complement_via_parametrization(B, G) -> np.ndarray:
    """
    Project ``G`` onto the complement of the commutant by least squares over
    antisymmetric tensors plus members of ``{M : M B + B M^T = 0}``.

    Independent of :func:`project_Q`; used to check that both descriptions
    of the complement agree.  Single tensor only.
    """
    B = np.asarray(B, dtype=float)
    G = np.asarray(G, dtype=float)
    d = B.shape[0]
    dec = tc.eig_sym(B)
    R, lam = dec.eigenvectors, dec.eigenvalues
    gens = []
    for i in range(d):
        for j in range(i + 1, d):
            W = np.zeros((d, d))
            W[i, j], W[j, i] = 1.0, -1.0
            gens.append(R @ W @ R.T)
            K = np.zeros((d, d))
            K[j, i] = 1.0
            K[i, j] = -lam[i] / lam[j]
            gens.append(R @ K @ R.T)
    A = np.array([g.ravel() for g in gens]).T
    # orthonormal basis of the span, then orthogonal projection
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    U = U[:, s > 1e-12 * s[0]]
    return (U @ (U.T @ G.ravel())).reshape(d, d)
