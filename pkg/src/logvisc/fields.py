"""
Uniform-grid fields on a box, staggered (MAC) velocity and the discrete
operators that act on them.

Layout
------
Cell arrays have shape ``grid.shape`` (axis 0 is x).  Velocity component
``a`` lives on the faces normal to axis ``a``: face ``i`` sits at
``x_a = i * dx_a``.  With periodic boundaries there are ``n_a`` faces along
that axis, with walls there are ``n_a + 1`` and the two boundary faces hold
zero normal velocity.

Two velocity gradients are provided.  :func:`velocity_gradient` returns a
full tensor per cell whose trace is the discrete divergence; its negative
adjoint is :func:`tensor_divergence`, so discrete integration by parts holds
to round-off.  :func:`grad_norm_sq` and :func:`strain_norm_sq` use the
staggered differences of the viscous operator, for which
``||grad u||^2 = 2 ||D||^2`` holds exactly on divergence-free fields.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from . import tensor_core as tc

PERIODIC = "periodic"
WALLS = "no_slip_walls"
TOL_DIV = 1e-8


@dataclass(frozen=True)
class Grid:
    """Uniform box grid.

    Parameters
    ----------
    shape : tuple of int
        Cells per axis, ``(nx, ny)`` or ``(nx, ny, nz)``.
    lengths : tuple of float
        Physical extent per axis.
    boundary : str
        ``"periodic"`` or ``"no_slip_walls"``.
    """

    shape: tuple
    lengths: tuple
    boundary: str = PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        if len(self.shape) not in (2, 3) or len(self.lengths) != len(self.shape):
            raise ValueError("grid must be 2D or 3D with one extent per axis")
        if min(self.shape) < 8:
            raise ValueError("at least 8 cells per axis are required")
        if min(self.lengths) <= 0:
            raise ValueError("extents must be positive")
        if self.boundary not in (PERIODIC, WALLS):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def dx(self) -> tuple:
        return tuple(L / n for L, n in zip(self.lengths, self.shape))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.dx)

    @property
    def ncells(self) -> int:
        return math.prod(self.shape)

    def face_shape(self, a: int) -> tuple:
        s = list(self.shape)
        if not self.periodic:
            s[a] += 1
        return tuple(s)

    def axis_coords(self, axis: int, kind: str) -> np.ndarray:
        """1D sample positions of ``cell`` centres, ``face`` or ``node`` points."""
        n, h = self.shape[axis], self.dx[axis]
        if kind == "cell":
            return (np.arange(n) + 0.5) * h
        m = n if self.periodic else n + 1
        return np.arange(m) * h

    def cell_centers(self) -> np.ndarray:
        """Array ``(*shape, d)`` of cell-centre coordinates."""
        axes = [self.axis_coords(a, "cell") for a in range(self.d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def face_centers(self, a: int) -> np.ndarray:
        axes = [self.axis_coords(b, "face" if b == a else "cell") for b in range(self.d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


class TensorField:
    """
    Symmetric tensor per cell, stored as packed upper-triangular components.

    With ``chart=True`` (the default) the stored values are logarithms of
    the physical tensor, which is then available through :meth:`physical`.
    """

    def __init__(self, grid: Grid, data, chart: bool = True):
        data = np.asarray(data, dtype=float)
        ncomp = tc.n_components(grid.d)
        if data.shape == grid.shape + (grid.d, grid.d):
            data = tc.pack(data)
        if data.shape != grid.shape + (ncomp,):
            raise ValueError(f"tensor data of shape {data.shape} does not fit grid {grid.shape}")
        self.grid = grid
        self.data = data
        self.chart = chart

    @classmethod
    def zeros(cls, grid: Grid, chart: bool = True) -> "TensorField":
        return cls(grid, np.zeros(grid.shape + (tc.n_components(grid.d),)), chart)

    @classmethod
    def uniform(cls, grid: Grid, value, chart: bool = True) -> "TensorField":
        v = tc.pack(np.asarray(value, dtype=float))
        return cls(grid, np.broadcast_to(v, grid.shape + v.shape).copy(), chart)

    def copy(self) -> "TensorField":
        return TensorField(self.grid, self.data.copy(), self.chart)

    def matrices(self) -> np.ndarray:
        """Stored values as full matrices ``(*shape, d, d)``."""
        return tc.unpack(self.data, self.grid.d)

    def physical(self) -> np.ndarray:
        """Physical tensor per cell (exponential for chart fields)."""
        M = self.matrices()
        return tc.mat_exp_sym(M) if self.chart else M

    def trace(self) -> np.ndarray:
        d = self.grid.d
        return np.sum(self.data[..., [0, 2] if d == 2 else [0, 3, 5]], axis=-1)

    def validate(self, tol_trace: float = tc.TOL_TRACE, tol_det: float = tc.TOL_DET) -> None:
        """Check the per-cell invariants of the stored role."""
        if self.chart:
            worst = float(np.max(np.abs(self.trace()))) if self.data.size else 0.0
            if worst > tol_trace:
                raise ValueError(f"chart field not traceless: max |tr| = {worst:.3e}")
        else:
            M = self.matrices()
            lam = tc.eig_sym(M).eigenvalues
            if np.any(lam <= tc.EPS_PD):
                raise tc.NotPositiveDefiniteError("tensor field is not positive definite")
            err = float(np.max(np.abs(tc.det(M) - 1.0)))
            if err > tol_det:
                raise ValueError(f"tensor field determinant off by {err:.3e}")


class VectorField:
    """
    Staggered velocity: one face array per component.

    ``exact_gradient`` optionally carries an analytic cell-centred gradient
    for prescribed flows; :func:`velocity_gradient` then returns it.
    """

    def __init__(self, grid: Grid, components, exact_gradient=None):
        comps = [np.asarray(c, dtype=float) for c in components]
        if len(comps) != grid.d:
            raise ValueError("one component per axis is required")
        for a, c in enumerate(comps):
            if c.shape != grid.face_shape(a):
                raise ValueError(f"component {a} has shape {c.shape}, expected {grid.face_shape(a)}")
        self.grid = grid
        self.components = comps
        self.exact_gradient = exact_gradient

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, [np.zeros(grid.face_shape(a)) for a in range(grid.d)])

    @classmethod
    def from_function(cls, grid: Grid, func, exact_gradient=None) -> "VectorField":
        """Sample ``func(x) -> (..., d)`` at the face centres."""
        comps = []
        for a in range(grid.d):
            c = np.asarray(func(grid.face_centers(a)))[..., a].copy()
            if not grid.periodic:
                _zero_boundary_faces(c, a)
            comps.append(c)
        return cls(grid, comps, exact_gradient)

    @classmethod
    def from_flat(cls, grid: Grid, flat) -> "VectorField":
        out, k = [], 0
        for a in range(grid.d):
            s = grid.face_shape(a)
            n = math.prod(s)
            out.append(np.asarray(flat[k:k + n]).reshape(s).copy())
            k += n
        return cls(grid, out)

    def flat(self) -> np.ndarray:
        return np.concatenate([c.ravel() for c in self.components])

    def copy(self) -> "VectorField":
        g = None if self.exact_gradient is None else self.exact_gradient.copy()
        return VectorField(self.grid, [c.copy() for c in self.components], g)

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(c))) for c in self.components)


class ScalarField:
    def __init__(self, grid: Grid, data=None):
        self.grid = grid
        self.data = np.zeros(grid.shape) if data is None else np.asarray(data, dtype=float)
        if self.data.shape != grid.shape:
            raise ValueError("scalar data does not fit the grid")


def _zero_boundary_faces(c: np.ndarray, a: int) -> None:
    idx = [slice(None)] * c.ndim
    idx[a] = 0
    c[tuple(idx)] = 0.0
    idx[a] = -1
    c[tuple(idx)] = 0.0


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------

def compensated_sum(values) -> float:
    """Sum in fixed order: pairwise partial sums of blocks, then an exact ``fsum``."""
    v = np.ascontiguousarray(values, dtype=float).ravel()
    n = v.size
    block = 64
    m = n - n % block
    partial = np.sum(v[:m].reshape(-1, block), axis=1) if m else np.zeros(0)
    return math.fsum(np.concatenate([partial, v[m:]]))


def _fsum_sq(arr, weight=None) -> float:
    arr = np.asarray(arr, dtype=float)
    sq = arr * arr
    if weight is not None:
        sq = sq * weight
    return compensated_sum(sq)


def l2_norm_sq(F) -> float:
    """Squared L2 norm, Frobenius per cell for tensors, compensated summation."""
    if isinstance(F, TensorField):
        return _fsum_sq(F.matrices()) * F.grid.cell_volume
    if isinstance(F, VectorField):
        return math.fsum(_fsum_sq(c) for c in F.components) * F.grid.cell_volume
    if isinstance(F, ScalarField):
        return _fsum_sq(F.data) * F.grid.cell_volume
    raise TypeError(f"cannot take the norm of {type(F).__name__}")


def l2_norm(F) -> float:
    return math.sqrt(l2_norm_sq(F))


def tensor_l2_norm_sq(grid: Grid, M: np.ndarray) -> float:
    """Squared L2 norm of a full tensor array ``(*shape, d, d)``."""
    return _fsum_sq(M) * grid.cell_volume


# --------------------------------------------------------------------------
# sparse 1D building blocks, lifted to d dimensions by Kronecker products
# --------------------------------------------------------------------------

def _n_faces(n: int, periodic: bool) -> int:
    return n if periodic else n + 1


def _face_to_cell_diff(n, h, periodic):
    nf = _n_faces(n, periodic)
    i = np.arange(n)
    hi = (i + 1) % nf
    rows = np.concatenate([i, i])
    cols = np.concatenate([hi, i])
    vals = np.concatenate([np.full(n, 1.0 / h), np.full(n, -1.0 / h)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, nf))


def _face_to_cell_avg(n, periodic):
    nf = _n_faces(n, periodic)
    i = np.arange(n)
    rows = np.concatenate([i, i])
    cols = np.concatenate([(i + 1) % nf, i])
    return sp.csr_matrix((np.full(2 * n, 0.5), (rows, cols)), shape=(n, nf))


def _cell_centered_diff(n, h, periodic, ghost_sign):
    i = np.arange(n)
    if periodic:
        rows = np.concatenate([i, i])
        cols = np.concatenate([(i + 1) % n, (i - 1) % n])
        vals = np.concatenate([np.full(n, 0.5 / h), np.full(n, -0.5 / h)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    M = sp.lil_matrix((n, n))
    for k in range(n):
        if k + 1 < n:
            M[k, k + 1] += 0.5 / h
        else:
            M[k, k] += 0.5 * ghost_sign / h
        if k - 1 >= 0:
            M[k, k - 1] -= 0.5 / h
        else:
            M[k, k] -= 0.5 * ghost_sign / h
    return M.tocsr()


def _cell_to_node_diff(n, h, periodic, ghost_sign):
    """Differences of cell samples at the nodes; ghosts mirror with ``ghost_sign``."""
    i = np.arange(n)
    if periodic:
        rows = np.concatenate([i, i])
        cols = np.concatenate([i, (i - 1) % n])
        vals = np.concatenate([np.full(n, 1.0 / h), np.full(n, -1.0 / h)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    M = sp.lil_matrix((n + 1, n))
    for j in range(n + 1):
        if j < n:
            M[j, j] += 1.0 / h
        else:
            M[j, n - 1] += ghost_sign / h
        if j > 0:
            M[j, j - 1] -= 1.0 / h
        else:
            M[j, 0] -= ghost_sign / h
    return M.tocsr()


def _node_weights(n, periodic):
    if periodic:
        return np.ones(n)
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    return w


def _kron_axis(ops):
    """Kronecker product of per-axis operators (axis 0 slowest)."""
    out = ops[0]
    for op in ops[1:]:
        out = sp.kron(out, op, format="csr")
    return sp.csr_matrix(out)


class Operators:
    """Cached sparse discretisation matrices for one grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        d, per = grid.d, grid.periodic
        n, h = grid.shape, grid.dx
        eye_c = [sp.identity(n[b], format="csr") for b in range(d)]
        eye_f = [sp.identity(_n_faces(n[b], per), format="csr") for b in range(d)]
        face_sizes = [math.prod(grid.face_shape(a)) for a in range(d)]
        self.face_offsets = np.concatenate([[0], np.cumsum(face_sizes)]).astype(int)
        self.n_vel = int(self.face_offsets[-1])

        # cell-centred gradient blocks G[a][b]: u_a -> d u_a / d x_b at cells
        self.G = [[None] * d for _ in range(d)]
        for a in range(d):
            for b in range(d):
                ops = list(eye_c)
                if a == b:
                    ops[a] = _face_to_cell_diff(n[a], h[a], per)
                else:
                    ops[a] = _face_to_cell_avg(n[a], per)
                    ops[b] = _cell_centered_diff(n[b], h[b], per, -1.0)
                self.G[a][b] = _kron_axis(ops)

        # staggered gradient blocks X[a][b] and quadrature weights
        self.X = [[None] * d for _ in range(d)]
        self.Xw = [[None] * d for _ in range(d)]
        for a in range(d):
            for b in range(d):
                if a == b:
                    self.X[a][b] = self.G[a][a]
                    self.Xw[a][b] = np.ones(grid.ncells)
                    continue
                ops = list(eye_c)
                ops[a] = eye_f[a]
                ops[b] = _cell_to_node_diff(n[b], h[b], per, -1.0)
                self.X[a][b] = _kron_axis(ops)
                ws = [np.ones(n[c]) for c in range(d)]
                ws[a] = _node_weights(n[a], per)
                ws[b] = _node_weights(n[b], per)
                w = ws[0]
                for c in range(1, d):
                    w = np.multiply.outer(w, ws[c])
                self.Xw[a][b] = w.ravel()

        # divergence and pressure gradient
        div_blocks = []
        for a in range(d):
            div_blocks.append(self.G[a][a])
        self.div = sp.hstack(div_blocks, format="csr")

        # interior face selection (walls: boundary faces are not unknowns)
        mask = np.ones(self.n_vel, dtype=bool)
        if not per:
            for a in range(d):
                idx = np.zeros(grid.face_shape(a), dtype=bool)
                sl = [slice(None)] * d
                sl[a] = 0
                idx[tuple(sl)] = True
                sl[a] = -1
                idx[tuple(sl)] = True
                mask[self.face_offsets[a]:self.face_offsets[a + 1]] = ~idx.ravel()
        self.interior = np.flatnonzero(mask)
        self.P = sp.identity(self.n_vel, format="csr")[:, self.interior]
        self.grad = -(self.div.T.tocsr())

        # viscous Laplacian  -X^T W X  on the full velocity vector
        # each term w |X_ab u_a|^2 involves u_a only, so the operator is block diagonal
        diag_blocks = []
        for a in range(d):
            acc = None
            for b in range(d):
                Xab = self.X[a][b]
                term = Xab.T @ sp.diags(self.Xw[a][b]) @ Xab
                acc = term if acc is None else acc + term
            diag_blocks.append(-acc)
        self.lap = sp.block_diag(diag_blocks, format="csr")

    # --- velocity helpers -------------------------------------------------
    def split(self, flat):
        return [flat[self.face_offsets[a]:self.face_offsets[a + 1]] for a in range(self.grid.d)]


@functools.lru_cache(maxsize=16)
def operators(grid: Grid) -> Operators:
    return Operators(grid)


# --------------------------------------------------------------------------
# differential operators on fields
# --------------------------------------------------------------------------

def divergence(u: VectorField) -> np.ndarray:
    """Discrete MAC divergence per cell."""
    ops = operators(u.grid)
    return (ops.div @ u.flat()).reshape(u.grid.shape)


def velocity_gradient(u: VectorField, cell=None) -> np.ndarray:
    """
    Cell-centred velocity gradient, ``G[..., a, b] = d u_a / d x_b``.

    Diagonal entries are the face differences, so the trace is the discrete
    divergence.  Off-diagonal entries are centred differences of the
    cell-averaged velocity, with odd ghosts at no-slip walls.

    Parameters
    ----------
    u : VectorField
    cell : tuple of int, optional
        Return only the gradient at this cell.
    """
    grid = u.grid
    if u.exact_gradient is not None:
        G = np.asarray(u.exact_gradient, dtype=float)
        G = np.broadcast_to(G, grid.shape + (grid.d, grid.d))
    else:
        ops = operators(grid)
        d = grid.d
        G = np.empty(grid.shape + (d, d))
        for a in range(d):
            ua = u.components[a].ravel()
            for b in range(d):
                G[..., a, b] = (ops.G[a][b] @ ua).reshape(grid.shape)
    if cell is not None:
        return np.array(G[tuple(cell)])
    return G


def tensor_divergence(F) -> VectorField:
    """
    Row-wise divergence of a cell tensor field, evaluated on the faces.

    Defined as the negative adjoint of :func:`velocity_gradient`, so that
    ``<div F, u> + <F, grad u> = 0`` for every velocity with zero boundary
    faces.  Accepts a :class:`TensorField` (its stored values are used) or
    a full array ``(*shape, d, d)`` together with the grid via ``F.grid``.
    """
    if isinstance(F, TensorField):
        grid, M = F.grid, F.matrices()
    else:
        grid, M = F
    ops = operators(grid)
    d = grid.d
    comps = []
    for a in range(d):
        acc = np.zeros(math.prod(grid.face_shape(a)))
        for b in range(d):
            acc -= ops.G[a][b].T @ M[..., a, b].ravel()
        c = acc.reshape(grid.face_shape(a))
        if not grid.periodic:
            _zero_boundary_faces(c, a)
        comps.append(c)
    return VectorField(grid, comps)


def staggered_gradient(u: VectorField):
    """Staggered differences ``X[a][b] u_a`` with their quadrature weights."""
    ops = operators(u.grid)
    d = u.grid.d
    out = [[None] * d for _ in range(d)]
    for a in range(d):
        ua = u.components[a].ravel()
        for b in range(d):
            out[a][b] = ops.X[a][b] @ ua
    return out, ops.Xw


def grad_norm_sq(u: VectorField) -> float:
    """``||grad u||^2`` from staggered differences."""
    if u.exact_gradient is not None:
        G = velocity_gradient(u)
        return tensor_l2_norm_sq(u.grid, G)
    X, W = staggered_gradient(u)
    d = u.grid.d
    terms = [_fsum_sq(X[a][b], W[a][b]) for a in range(d) for b in range(d)]
    return math.fsum(terms) * u.grid.cell_volume


def strain_norm_sq(u: VectorField) -> float:
    """``||D||^2`` with ``D = (grad u + grad u^T) / 2`` on the staggered layout."""
    if u.exact_gradient is not None:
        G = velocity_gradient(u)
        return tensor_l2_norm_sq(u.grid, tc.sym(G))
    X, W = staggered_gradient(u)
    d = u.grid.d
    terms = []
    for a in range(d):
        terms.append(_fsum_sq(X[a][a], W[a][a]))
        for b in range(a + 1, d):
            Dab = 0.5 * (X[a][b] + X[b][a])
            terms.append(2.0 * _fsum_sq(Dab, W[a][b]))
    return math.fsum(terms) * u.grid.cell_volume


# --------------------------------------------------------------------------
# interpolation
# --------------------------------------------------------------------------

def _pad_axis(arr, axis, kind, periodic, sign):
    """Add one ghost sample on both ends of ``axis``."""
    n = arr.shape[axis]
    take = functools.partial(np.take, arr, axis=axis)
    if periodic:
        lo, hi = take([n - 1]), take([0])
    elif kind == "cell":
        lo, hi = sign * take([0]), sign * take([n - 1])
    else:
        lo, hi = -take([1]), -take([n - 2])
    return np.concatenate([lo, arr, hi], axis=axis)


def _interp(values, kinds, grid, points, signs=None):
    """
    Multilinear interpolation of samples on a (possibly staggered) grid.

    ``values`` has shape ``(*m, ncomp)`` or ``(*m,)``; ``kinds[b]`` is
    ``"cell"`` or ``"face"`` and fixes the sample offsets along axis ``b``.
    Points are wrapped (periodic) or clamped to the box (walls).
    """
    d = grid.d
    vals = np.asarray(values, dtype=float)
    scalar = vals.ndim == d
    if scalar:
        vals = vals[..., None]
    if signs is None:
        signs = [1.0] * d
    for b in range(d):
        vals = _pad_axis(vals, b, kinds[b], grid.periodic, signs[b])
    pts = np.asarray(points, dtype=float)
    batch = pts.shape[:-1]
    pts = pts.reshape(-1, d)
    base, frac = [], []
    for b in range(d):
        L, h, n = grid.lengths[b], grid.dx[b], grid.shape[b]
        x = pts[:, b]
        x = np.mod(x, L) if grid.periodic else np.clip(x, 0.0, L)
        off = 0.5 if kinds[b] == "cell" else 0.0
        s = x / h - off + 1.0
        i0 = np.clip(np.floor(s).astype(int), 0, vals.shape[b] - 2)
        base.append(i0)
        frac.append(s - i0)
    out = np.zeros((pts.shape[0], vals.shape[-1]))
    for corner in range(2 ** d):
        w = np.ones(pts.shape[0])
        idx = []
        for b in range(d):
            bit = (corner >> (d - 1 - b)) & 1
            w = w * (frac[b] if bit else 1.0 - frac[b])
            idx.append(base[b] + bit)
        out += w[:, None] * vals[tuple(idx)]
    out = out.reshape(batch + (vals.shape[-1],))
    return out[..., 0] if scalar else out


def interpolate_chart(F: TensorField, points) -> np.ndarray:
    """Packed stored components of ``F`` interpolated at ``points``."""
    return _interp(F.data, ["cell"] * F.grid.d, F.grid, points)


def interpolate_tensor(F: TensorField, x):
    """
    Tensor value at ``x``.

    Chart fields are interpolated in chart space and exponentiated, so the
    result is SPD with unit determinant whenever the chart is traceless.
    A single point returns a :class:`SymTensor`; arrays of points return
    full matrices.
    """
    x = np.asarray(x, dtype=float)
    v = interpolate_chart(F, x)
    M = tc.unpack(v, F.grid.d)
    if F.chart:
        M = tc.mat_exp_sym(M)
    if x.ndim == 1:
        return tc.SymTensor.from_matrix(M)
    return M


def velocity_kinds(grid: Grid, a: int):
    return ["face" if b == a else "cell" for b in range(grid.d)]


def interpolate_velocity(u: VectorField, x) -> np.ndarray:
    """Velocity vector(s) at ``x`` from the staggered components."""
    grid = u.grid
    x = np.asarray(x, dtype=float)
    comps = []
    for a in range(grid.d):
        signs = [-1.0] * grid.d
        comps.append(_interp(u.components[a], velocity_kinds(grid, a), grid, x, signs))
    return np.stack(comps, axis=-1)


def interpolate_scalar_cells(grid: Grid, values, x, sign: float = 1.0):
    return _interp(values, ["cell"] * grid.d, grid, x, [sign] * grid.d)


def interpolate_face_component(u: VectorField, a: int, x) -> np.ndarray:
    signs = [-1.0] * u.grid.d
    return _interp(u.components[a], velocity_kinds(u.grid, a), u.grid, x, signs)


# --------------------------------------------------------------------------
# mollification
# --------------------------------------------------------------------------

def mollify_log_field(L0: TensorField, scale: float) -> TensorField:
    """
    Gaussian convolution of a chart field, componentwise.

    Parameters
    ----------
    L0 : TensorField
        Traceless chart field.
    scale : float
        Kernel standard deviation in cells; 0 returns a copy.

    Notes
    -----
    The kernel is truncated at four standard deviations.  Periodic grids
    wrap around; at walls the field is mirrored about the boundary.
    """
    if scale < 0:
        raise ValueError("mollification scale must be non-negative")
    if scale == 0:
        return L0.copy()
    mode = "wrap" if L0.grid.periodic else "reflect"
    d = L0.grid.d
    out = np.empty_like(L0.data)
    sigma = [scale] * d
    for k in range(L0.data.shape[-1]):
        out[..., k] = ndimage.gaussian_filter(L0.data[..., k], sigma=sigma, mode=mode, truncate=4.0)
    M = tc.deviator(tc.unpack(out, d))
    return TensorField(L0.grid, tc.pack(M), L0.chart)


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------

MAGIC = "logvisc-field v1"


def _header(kind: str, grid: Grid) -> bytes:
    dims = " ".join(str(n) for n in grid.shape)
    return f"{MAGIC} {kind} {grid.d} {dims}\n".encode("ascii")


def write_snapshot(path, F) -> None:
    """Write a field as a text header line followed by little-endian float64 data."""
    if isinstance(F, TensorField):
        kind, payload = ("chart" if F.chart else "tensor"), F.data
    elif isinstance(F, VectorField):
        kind, payload = "vector", F.flat()
    elif isinstance(F, ScalarField):
        kind, payload = "scalar", F.data
    else:
        raise TypeError(f"cannot snapshot {type(F).__name__}")
    with open(path, "wb") as fh:
        fh.write(_header(kind, F.grid))
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def read_snapshot(path, grid: Grid):
    """Read a snapshot written by :func:`write_snapshot` on ``grid``."""
    with open(path, "rb") as fh:
        line = fh.readline().decode("ascii", errors="replace").split()
        raw = fh.read()
    if len(line) < 5 or " ".join(line[:2]) != MAGIC:
        raise ValueError(f"{path}: not a field snapshot")
    kind, d = line[2], int(line[3])
    shape = tuple(int(v) for v in line[4:])
    if d != grid.d or shape != grid.shape:
        raise ValueError(f"{path}: snapshot grid {shape} does not match {grid.shape}")
    data = np.frombuffer(raw, dtype="<f8").astype(float)
    if kind in ("chart", "tensor"):
        return TensorField(grid, data.reshape(grid.shape + (tc.n_components(d),)), kind == "chart")
    if kind == "vector":
        return VectorField.from_flat(grid, data)
    if kind == "scalar":
        return ScalarField(grid, data.reshape(grid.shape))
    raise ValueError(f"{path}: unknown field kind {kind!r}")


def export_csv(path, F: TensorField) -> None:
    """One row per cell: integer indices followed by the packed components."""
    d = F.grid.d
    r, c = tc.upper_indices(d)
    names = [f"i{'xyz'[a]}" for a in range(d)] + [f"c{i}{j}" for i, j in zip(r, c)]
    idx = np.indices(F.grid.shape).reshape(d, -1).T
    vals = F.data.reshape(-1, F.data.shape[-1])
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for ij, v in zip(idx, vals):
            fh.write(",".join(str(int(k)) for k in ij) + "," + ",".join(repr(float(x)) for x in v) + "\n")
