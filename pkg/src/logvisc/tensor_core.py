"""
Symmetric tensor algebra for d = 2 and d = 3.

Every routine is batched: arrays of shape ``(..., d, d)`` are processed
elementwise over the leading axes.  A :class:`SymTensor` value can be passed
wherever a single matrix is expected; symmetric results then come back as
:class:`SymTensor` as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, ConvergenceError, NotPositiveDefiniteError

TOL_DET = 1e-10
TOL_TRACE = 1e-10
TOL_ORTH = 1e-12
EPS_PD = 1e-14
EPS_DEG = 1e-8
EXP_LIMIT = 300.0
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 50


def n_components(d: int) -> int:
    return d * (d + 1) // 2


def upper_indices(d: int):
    """Row/column indices of the independent entries, upper triangle row-major."""
    return np.triu_indices(d)


def pack(M: np.ndarray) -> np.ndarray:
    """(..., d, d) symmetric matrices -> (..., d(d+1)/2) upper-triangular entries."""
    M = np.asarray(M, dtype=float)
    d = M.shape[-1]
    r, c = upper_indices(d)
    return 0.5 * (M[..., r, c] + M[..., c, r])


def unpack(v: np.ndarray, d: int | None = None) -> np.ndarray:
    """Inverse of :func:`pack`; symmetry is exact by construction."""
    v = np.asarray(v, dtype=float)
    if d is None:
        d = {3: 2, 6: 3}[v.shape[-1]]
    r, c = upper_indices(d)
    M = np.empty(v.shape[:-1] + (d, d))
    M[..., r, c] = v
    M[..., c, r] = v
    return M


@dataclass(frozen=True)
class SymTensor:
    """A single symmetric d x d tensor, stored by its upper-triangular entries."""

    d: int
    entries: tuple

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if len(self.entries) != n_components(self.d):
            raise ValueError("wrong number of independent components")

    @classmethod
    def from_matrix(cls, M) -> "SymTensor":
        M = np.asarray(M, dtype=float)
        return cls(M.shape[-1], tuple(float(x) for x in pack(M)))

    @classmethod
    def identity(cls, d: int) -> "SymTensor":
        return cls.from_matrix(np.eye(d))

    def matrix(self) -> np.ndarray:
        return unpack(np.array(self.entries), self.d)

    def __array__(self, dtype=None, copy=None):
        return self.matrix() if dtype is None else self.matrix().astype(dtype)


def _as_matrix(A) -> np.ndarray:
    if isinstance(A, SymTensor):
        return A.matrix()
    return np.asarray(A, dtype=float)


def _like(result: np.ndarray, template):
    if isinstance(template, SymTensor):
        return SymTensor.from_matrix(result)
    return result


def sym(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def skew(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    return 0.5 * (A - np.swapaxes(A, -1, -2))


def transpose(A: np.ndarray) -> np.ndarray:
    return np.swapaxes(A, -1, -2)


# --------------------------------------------------------------------------
# spectral decomposition
# --------------------------------------------------------------------------

@dataclass
class SpectralDecomp:
    """
    Eigen-decomposition ``A = R diag(eigenvalues) R^T``.

    Attributes
    ----------
    eigenvalues : ndarray, shape (..., d)
        Sorted in descending order.
    eigenvectors : ndarray, shape (..., d, d)
        Orthonormal eigenvectors stored as columns of ``R``.
    labels : ndarray of int, shape (..., d)
        Cluster label of each eigenvalue.  Eigenvalues closer than
        ``EPS_DEG`` times the spectral radius share a label; since the
        eigenvalues are sorted, each cluster is a contiguous index range.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    labels: np.ndarray

    @property
    def clusters(self):
        """Partition of eigenvalue indices for an unbatched decomposition."""
        if self.labels.ndim != 1:
            raise ValueError("clusters is only defined for a single tensor")
        groups = {}
        for i, lab in enumerate(self.labels.tolist()):
            groups.setdefault(lab, []).append(i)
        return [tuple(g) for g in groups.values()]

    def reconstruct(self) -> np.ndarray:
        R = self.eigenvectors
        return (R * self.eigenvalues[..., None, :]) @ transpose(R)

    def apply(self, func) -> np.ndarray:
        """Spectral matrix function ``R diag(func(eigenvalues)) R^T``."""
        R = self.eigenvectors
        f = func(self.eigenvalues)
        if R.shape[-1] == 2:
            return _spectral_2x2(R, f)
        return (R * f[..., None, :]) @ transpose(R)

    def same_cluster(self) -> np.ndarray:
        """Boolean mask (..., d, d): True where eigenvalues i and j are clustered."""
        return self.labels[..., :, None] == self.labels[..., None, :]


def _spectral_2x2(R, f):
    # explicit entries; much faster than batched matmul on tiny matrices
    r00, r01, r10, r11 = R[..., 0, 0], R[..., 0, 1], R[..., 1, 0], R[..., 1, 1]
    f0, f1 = f[..., 0], f[..., 1]
    out = np.empty(R.shape)
    out[..., 0, 0] = r00 * r00 * f0 + r01 * r01 * f1
    out[..., 1, 1] = r10 * r10 * f0 + r11 * r11 * f1
    out[..., 0, 1] = out[..., 1, 0] = r00 * r10 * f0 + r01 * r11 * f1
    return out


def _jacobi_2x2(A: np.ndarray):
    # one Jacobi rotation diagonalises a symmetric 2x2 matrix exactly
    app, aqq, apq = A[:, 0, 0], A[:, 1, 1], A[:, 0, 1]
    rotate = apq != 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(rotate, (aqq - app) / (2.0 * np.where(rotate, apq, 1.0)), 0.0)
    t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
    t = np.where(rotate, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    lam = np.stack([app - t * apq, aqq + t * apq], axis=1)
    V = np.empty_like(A)
    V[:, 0, 0], V[:, 0, 1] = c, s
    V[:, 1, 0], V[:, 1, 1] = -s, c
    return lam, V


def _jacobi_batch(A: np.ndarray):
    n, d, _ = A.shape
    if d == 2:
        return _jacobi_2x2(A)
    A = A.copy()
    V = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    pairs = [(p, q) for p in range(d - 1) for q in range(p + 1, d)]
    offmask = ~np.eye(d, dtype=bool)

    def converged(A):
        off = np.sqrt(np.sum(A[:, offmask] ** 2, axis=1))
        on = np.sqrt(np.sum(np.diagonal(A, axis1=1, axis2=2) ** 2, axis=1))
        return off <= JACOBI_TOL * on

    active = ~converged(A)
    sweeps = 0
    while np.any(active):
        if sweeps >= JACOBI_MAX_SWEEPS:
            bad = int(np.flatnonzero(active)[0])
            raise ConvergenceError(
                f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps "
                f"(batch element {bad})"
            )
        idx = np.flatnonzero(active)
        Ab, Vb = A[idx], V[idx]
        for p, q in pairs:
            apq = Ab[:, p, q]
            app = Ab[:, p, p]
            aqq = Ab[:, q, q]
            rotate = apq != 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                theta = np.where(rotate, (aqq - app) / (2.0 * np.where(rotate, apq, 1.0)), 0.0)
            t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(rotate, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            J = np.broadcast_to(np.eye(d), Ab.shape).copy()
            J[:, p, p] = c
            J[:, q, q] = c
            J[:, p, q] = s
            J[:, q, p] = -s
            Ab = transpose(J) @ Ab @ J
            Ab[:, p, q] = 0.0
            Ab[:, q, p] = 0.0
            Vb = Vb @ J
        A[idx], V[idx] = Ab, Vb
        active[idx] = ~converged(Ab)
        sweeps += 1
    return np.diagonal(A, axis1=1, axis2=2).copy(), V


def eig_sym(A) -> SpectralDecomp:
    """
    Cyclic Jacobi eigen-decomposition of symmetric 2x2 or 3x3 tensors.

    Eigenvalues come back in descending order and every eigenvector is
    oriented so that its largest-magnitude component is positive, which
    makes the output a deterministic function of the input.

    Raises
    ------
    ConvergenceError
        If some element needs more than 50 sweeps.
    """
    M = sym(_as_matrix(A))
    batch = M.shape[:-2]
    d = M.shape[-1]
    flat = M.reshape((-1, d, d))
    if flat.shape[0] == 0:
        lam = np.zeros((0, d))
        R = np.zeros((0, d, d))
    else:
        # power-of-two scaling is exact and keeps squared entries out of underflow
        peak = np.max(np.abs(flat), axis=(1, 2))
        _, e = np.frexp(np.where(peak > 0, peak, 1.0))
        lam, R = _jacobi_batch(np.ldexp(flat, -e[:, None, None]))
        lam = np.ldexp(lam, e[:, None])
    if d == 2:
        swap = lam[:, 1] > lam[:, 0]
        lam = np.where(swap[:, None], lam[:, ::-1], lam)
        R = np.where(swap[:, None, None], R[:, :, ::-1], R)
    else:
        order = np.argsort(-lam, axis=1, kind="stable")
        lam = np.take_along_axis(lam, order, axis=1)
        R = np.take_along_axis(R, order[:, None, :], axis=2)
    if d == 2:
        top = np.abs(R[:, 0, :]) >= np.abs(R[:, 1, :])
        sign = np.sign(np.where(top, R[:, 0, :], R[:, 1, :]))[:, None, :]
    else:
        big = np.argmax(np.abs(R), axis=1)
        sign = np.sign(np.take_along_axis(R, big[:, None, :], axis=1))
    sign[sign == 0] = 1.0
    R = R * sign
    labels = _cluster_labels(lam)
    return SpectralDecomp(lam.reshape(batch + (d,)), R.reshape(batch + (d, d)),
                          labels.reshape(batch + (d,)))


def _cluster_labels(lam: np.ndarray) -> np.ndarray:
    radius = np.max(np.abs(lam), axis=1, keepdims=True)
    gaps = lam[:, :-1] - lam[:, 1:]
    split = gaps > EPS_DEG * radius
    labels = np.zeros(lam.shape, dtype=int)
    labels[:, 1:] = np.cumsum(split, axis=1)
    return labels


# --------------------------------------------------------------------------
# matrix functions
# --------------------------------------------------------------------------

def mat_log_spd(A, decomp: SpectralDecomp | None = None):
    """
    Matrix logarithm of symmetric positive definite tensors.

    Raises
    ------
    NotPositiveDefiniteError
        If an eigenvalue is not larger than ``EPS_PD``.
    """
    dec = eig_sym(A) if decomp is None else decomp
    lam = dec.eigenvalues
    if np.any(~(lam > EPS_PD)):
        bad = float(lam[~(lam > EPS_PD)].flat[0])
        raise NotPositiveDefiniteError(f"matrix logarithm of non-SPD tensor: eigenvalue {bad!r}")
    return _like(sym(dec.apply(np.log)), A)


def mat_exp_sym(A, decomp: SpectralDecomp | None = None):
    """Exponential of symmetric tensors through the spectral decomposition."""
    dec = eig_sym(A) if decomp is None else decomp
    lam = dec.eigenvalues
    if np.any(~(np.abs(lam) <= EXP_LIMIT)):
        bad = float(lam[~(np.abs(lam) <= EXP_LIMIT)].flat[0])
        raise BlowUpError(f"eigenvalue {bad!r} too large for the matrix exponential")
    return _like(sym(dec.apply(np.exp)), A)


def _taylor_terms(norm: float) -> int:
    # smallest m with geometric tail bound norm^(m+1)/(m+1)! / (1 - norm/(m+2)) < 1e-14
    m = 1
    term = norm
    while True:
        term *= norm / (m + 1)
        if term / max(1.0 - norm / (m + 2), 1e-300) < 1e-14 or term == 0.0:
            return m + 1
        m += 1


def _exp_2x2(G):
    # Cayley-Hamilton: exp(G) = e^(t/2) [c(q) I + s(q) (G - t/2 I)], q = -det(G - t/2 I)
    half = 0.5 * (G[..., 0, 0] + G[..., 1, 1])
    a = G[..., 0, 0] - half
    b, c = G[..., 0, 1], G[..., 1, 0]
    q = a * a + b * c
    r = np.sqrt(np.abs(q))
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        ch = np.where(q >= 0, np.cosh(r), np.cos(r))
        sh = np.where(q >= 0, np.sinh(r) / r, np.sin(r) / r)
    sh = np.where(r == 0, 1.0, sh)
    e = np.exp(half)
    out = np.empty(G.shape)
    out[..., 0, 0] = e * (ch + sh * a)
    out[..., 1, 1] = e * (ch - sh * a)
    out[..., 0, 1] = e * sh * b
    out[..., 1, 0] = e * sh * c
    return out


def mat_exp_general(G) -> np.ndarray:
    """
    Exponential of arbitrary real d x d matrices.

    2 x 2 matrices use the closed form from the Cayley-Hamilton theorem.
    The argument is scaled by 2^-s until its infinity norm is at most 1/2,
    the exponential of the scaled matrix is summed from a Taylor series whose
    tail bound is below 1e-14, and the result is squared s times.
    """
    G = np.asarray(G, dtype=float)
    batch = G.shape[:-2]
    d = G.shape[-1]
    if d == 2:
        return _exp_2x2(G)
    flat = G.reshape((-1, d, d))
    out = np.empty_like(flat)
    norms = np.max(np.sum(np.abs(flat), axis=2), axis=1) if flat.size else np.zeros(0)
    with np.errstate(divide="ignore"):
        s_all = np.where(norms > 0.5, np.ceil(np.log2(np.maximum(norms, 1e-300) / 0.5)), 0.0)
    s_all = s_all.astype(int)
    eye = np.eye(d)
    for s in np.unique(s_all):
        idx = np.flatnonzero(s_all == s)
        X = flat[idx] / (2.0 ** s)
        nx = float(np.max(np.sum(np.abs(X), axis=2))) if idx.size else 0.0
        m = _taylor_terms(nx)
        E = eye + X / m
        for k in range(m - 1, 0, -1):
            E = eye + (X @ E) / k
        for _ in range(s):
            E = E @ E
        out[idx] = E
    return out.reshape(batch + (d, d))


# --------------------------------------------------------------------------
# elementary algebra
# --------------------------------------------------------------------------

def trace(A) -> np.ndarray:
    return np.trace(_as_matrix(A), axis1=-2, axis2=-1)


def deviator(A):
    """``A - (tr A / d) I``; the trace of the result is zero up to rounding."""
    M = _as_matrix(A)
    d = M.shape[-1]
    out = M - (trace(M) / d)[..., None, None] * np.eye(d)
    return _like(out, A)


def inner(A, C) -> np.ndarray:
    """Tensor scalar product ``A : C = tr(A C^T)``."""
    A, C = _as_matrix(A), _as_matrix(C)
    if A.shape[-1] != C.shape[-1]:
        raise ValueError("inner product of tensors of different dimension")
    return np.sum(A * C, axis=(-2, -1))


def frobenius(A) -> np.ndarray:
    return np.sqrt(inner(A, A))


def det(A) -> np.ndarray:
    M = _as_matrix(A)
    d = M.shape[-1]
    if d == 2:
        return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    if d == 3:
        return (M[..., 0, 0] * (M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
                - M[..., 0, 1] * (M[..., 1, 0] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 0])
                + M[..., 0, 2] * (M[..., 1, 0] * M[..., 2, 1] - M[..., 1, 1] * M[..., 2, 0]))
    return np.linalg.det(M)


def inverse_spd(A, decomp: SpectralDecomp | None = None):
    dec = eig_sym(A) if decomp is None else decomp
    lam = dec.eigenvalues
    scale = np.max(np.abs(lam), axis=-1, keepdims=True)
    if np.any(~(lam > EPS_PD * np.maximum(scale, 1.0))):
        bad = float(lam[~(lam > EPS_PD * np.maximum(scale, 1.0))].flat[0])
        raise NotPositiveDefiniteError(f"inverse of singular or indefinite tensor: eigenvalue {bad!r}")
    return _like(sym(dec.apply(np.reciprocal)), A)


def unit_det_project(L):
    """Project a chart value onto the traceless subspace so that det(exp L) = 1."""
    return deviator(L)


def sqrt_spd(A, decomp: SpectralDecomp | None = None):
    dec = eig_sym(A) if decomp is None else decomp
    return _like(sym(dec.apply(np.sqrt)), A)


def golden_shear_eigenvalues():
    """Eigenvalues of ``[[2, 1], [1, 1]]``, the Cauchy-Green tensor of unit simple shear."""
    r5 = math.sqrt(5.0)
    return (3.0 + r5) / 2.0, (3.0 - r5) / 2.0
