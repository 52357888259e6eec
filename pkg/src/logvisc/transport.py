"""
Time integration of the strain transport equations.

The strain ``B`` and the relaxed strain ``B_ref`` are stored through their
logarithms.  A step is split into half an advection, the local source and
another half advection.  Advection is semi-Lagrangian in chart space; the
source acts by congruence ``B <- E B E^T`` with ``E`` the exponential of
the generator times ``dt``, which keeps ``B`` symmetric positive definite
and preserves its determinant up to the trace of the generator.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import commutant as cm
from . import fields as fl
from . import tensor_core as tc
from .errors import BlowUpError


@dataclass
class TransportState:
    """Chart fields ``L = log B`` and ``L_ref = log B_ref`` with optional ``F``.

    ``L_ref`` is ``None`` when the relaxed strain is not tracked (solid
    model, where ``B_ref = I``).  ``F`` is an array ``(*shape, d, d)``.
    """

    L: fl.TensorField
    L_ref: fl.TensorField | None = None
    F: np.ndarray | None = None
    time: float = 0.0

    @property
    def grid(self) -> fl.Grid:
        return self.L.grid

    def B(self) -> np.ndarray:
        return self.L.physical()

    def B_ref(self) -> np.ndarray:
        if self.L_ref is None:
            return np.broadcast_to(np.eye(self.grid.d), self.grid.shape + (self.grid.d,) * 2).copy()
        return self.L_ref.physical()

    def log_difference(self) -> np.ndarray:
        """``log B - log B_ref`` per cell as full matrices."""
        M = self.L.matrices()
        if self.L_ref is not None:
            M = M - self.L_ref.matrices()
        return M

    def copy(self) -> "TransportState":
        return TransportState(self.L.copy(), None if self.L_ref is None else self.L_ref.copy(),
                              None if self.F is None else self.F.copy(), self.time)


class RateKind(enum.Enum):
    COROTATIONAL = "corotational"
    LOWER_CONVECTED = "lower_convected"
    CONTRAVARIANT = "contravariant"
    UPPER_CONVECTED = "upper_convected"


# --------------------------------------------------------------------------
# advection
# --------------------------------------------------------------------------

def backtrace(u: fl.VectorField, points: np.ndarray, dt: float) -> np.ndarray:
    """Departure points of the characteristics through ``points`` (RK2 midpoint)."""
    v0 = fl.interpolate_velocity(u, points)
    mid = points - 0.5 * dt * v0
    v1 = fl.interpolate_velocity(u, mid)
    return points - dt * v1


def cell_departure_points(u: fl.VectorField, dt: float) -> np.ndarray:
    """Departure points of the cell centres, cached on ``u`` per step length."""
    cache = u.__dict__.setdefault("_departures", {})
    dep = cache.get(dt)
    if dep is None:
        dep = backtrace(u, u.grid.cell_centers(), dt)
        cache[dt] = dep
    return dep


def _is_static(u: fl.VectorField) -> bool:
    return all(not np.any(c) for c in u.components)


def advect_semi_lagrangian(F: fl.TensorField, u: fl.VectorField, dt: float) -> fl.TensorField:
    """
    Semi-Lagrangian advection of a cell tensor field over ``dt``.

    Chart fields are interpolated in chart space, so the physical tensor
    stays SPD with unit determinant.  Points leaving a walled box are
    clamped to it.
    """
    if dt == 0.0 or _is_static(u):
        return F.copy()
    dep = cell_departure_points(u, dt)
    return fl.TensorField(F.grid, fl.interpolate_chart(F, dep), F.chart)


def _advect_full(M: np.ndarray, grid: fl.Grid, u: fl.VectorField, dt: float) -> np.ndarray:
    if dt == 0.0 or _is_static(u):
        return M.copy()
    flat = M.reshape(grid.shape + (-1,))
    return fl.interpolate_scalar_cells(grid, flat, cell_departure_points(u, dt)).reshape(M.shape)


# --------------------------------------------------------------------------
# local sources
# --------------------------------------------------------------------------

def relaxation_rate(dt: float, tau_r: float) -> float:
    """
    Effective relaxation coefficient ``(1 - exp(-2 dt / tau_r)) / (2 dt)``.

    With this coefficient in place of ``1 / tau_r`` the congruence step
    reproduces the exact exponential relaxation of commuting data.
    """
    if dt == 0.0:
        return 1.0 / tau_r
    return -math.expm1(-2.0 * dt / tau_r) / (2.0 * dt)


def exp_of_log_decomp(dec: tc.SpectralDecomp) -> tc.SpectralDecomp:
    """Decomposition of ``exp(L)`` from that of ``L`` with clusters recomputed."""
    lam = np.exp(dec.eigenvalues)
    flat = lam.reshape(-1, lam.shape[-1])
    labels = tc._cluster_labels(flat).reshape(lam.shape)
    return tc.SpectralDecomp(lam, dec.eigenvectors, labels)


def _congruence_log(grid, L_mat, dec, gen, dt, what):
    """``log(E exp(L) E^T)`` with ``E = exp(dt * gen)``."""
    d = grid.d
    E = tc.mat_exp_general(dt * gen.reshape(-1, d, d)).reshape(gen.shape)
    B = dec.apply(np.exp)
    Bn = tc.sym(E @ B @ tc.transpose(E))
    try:
        return tc.mat_log_spd(Bn)
    except tc.NotPositiveDefiniteError as exc:
        lam = tc.eig_sym(Bn).eigenvalues
        cell = np.unravel_index(int(np.argmin(np.min(lam, axis=-1))), grid.shape)
        raise BlowUpError(f"{what} lost positive definiteness at cell {tuple(int(c) for c in cell)}") from exc


def _decompose_chart(grid, L_mat, what):
    dec = tc.eig_sym(L_mat)
    big = np.abs(dec.eigenvalues) > tc.EXP_LIMIT
    if np.any(big):
        cell = np.unravel_index(int(np.argmax(np.any(big, axis=-1))), grid.shape)
        raise BlowUpError(f"{what} overflowed at cell {tuple(int(c) for c in cell)}")
    return dec


def _sources(state: TransportState, G: np.ndarray, dt: float, tau_r: float | None,
             update_B: bool = True, update_Bref: bool = True) -> TransportState:
    grid = state.grid
    L = state.L.matrices()
    decL = _decompose_chart(grid, L, "log B")
    out = state.copy()
    if update_Bref and state.L_ref is not None:
        if tau_r is None or tau_r <= 0:
            raise ValueError("relaxation time must be positive")
        Lr = state.L_ref.matrices()
        decR = _decompose_chart(grid, Lr, "log B_ref")
        Q = cm.project_Q(None, G, decomp=exp_of_log_decomp(decL))
        A = Q + relaxation_rate(dt, tau_r) * (L - Lr)
        out.L_ref = fl.TensorField(grid, _congruence_log(grid, Lr, decR, A, dt, "B_ref"))
    if update_B:
        out.L = fl.TensorField(grid, _congruence_log(grid, L, decL, G, dt, "B"))
    if state.F is not None and update_B:
        d = grid.d
        E = tc.mat_exp_general(dt * G.reshape(-1, d, d)).reshape(G.shape)
        out.F = E @ state.F
    return out


def _advect_state(state: TransportState, u, dt, advect_B=True, advect_Bref=True):
    """Advect the selected fields with one shared interpolation pass."""
    out = state.copy()
    if dt == 0.0 or _is_static(u):
        return out
    grid = state.grid
    parts = []
    if advect_B:
        parts.append(("L", state.L.data))
        if state.F is not None:
            parts.append(("F", state.F.reshape(grid.shape + (-1,))))
    if advect_Bref and state.L_ref is not None:
        parts.append(("L_ref", state.L_ref.data))
    if not parts:
        return out
    stacked = np.concatenate([p for _, p in parts], axis=-1)
    moved = fl.interpolate_scalar_cells(grid, stacked, cell_departure_points(u, dt))
    k = 0
    for name, p in parts:
        n = p.shape[-1]
        block = moved[..., k:k + n]
        k += n
        if name == "L":
            out.L = fl.TensorField(grid, block.copy())
        elif name == "L_ref":
            out.L_ref = fl.TensorField(grid, block.copy())
        else:
            out.F = block.reshape(state.F.shape).copy()
    return out


def step_transport(state: TransportState, u: fl.VectorField, dt: float,
                   tau_r: float | None = None) -> TransportState:
    """
    One split step of every tracked field: half advection, sources, half advection.

    The relaxed-strain generator ``Q + (log B - log B_ref) / tau_r`` is
    evaluated with ``B`` at the start of the source stage.
    """
    G = fl.velocity_gradient(u)
    s = _advect_state(state, u, 0.5 * dt)
    s = _sources(s, G, dt, tau_r)
    s = _advect_state(s, u, 0.5 * dt)
    s.time = state.time + dt
    return s


def step_B(state: TransportState, u: fl.VectorField, dt: float) -> TransportState:
    """Advance ``B`` (and ``F`` when tracked) by one split step; ``B_ref`` is untouched."""
    G = fl.velocity_gradient(u)
    s = _advect_state(state, u, 0.5 * dt, advect_Bref=False)
    s = _sources(s, G, dt, None, update_Bref=False)
    s = _advect_state(s, u, 0.5 * dt, advect_Bref=False)
    s.time = state.time + dt
    return s


def step_Bref(state: TransportState, u: fl.VectorField, dt: float, tau_r: float) -> TransportState:
    """Advance ``B_ref`` by one split step with ``B`` held at its current value."""
    if state.L_ref is None:
        raise ValueError("state does not track B_ref")
    G = fl.velocity_gradient(u)
    s = _advect_state(state, u, 0.5 * dt, advect_B=False)
    s = _sources(s, G, dt, tau_r, update_B=False)
    s = _advect_state(s, u, 0.5 * dt, advect_B=False)
    s.time = state.time + dt
    return s


def step_F(state: TransportState, u: fl.VectorField, dt: float) -> TransportState:
    """Advance the deformation gradient alone: split advection and ``F <- E F``."""
    if state.F is None:
        raise ValueError("state does not track F")
    grid = state.grid
    d = grid.d
    G = fl.velocity_gradient(u)
    F = _advect_full(state.F, grid, u, 0.5 * dt)
    E = tc.mat_exp_general(dt * G.reshape(-1, d, d)).reshape(G.shape)
    F = _advect_full(E @ F, grid, u, 0.5 * dt)
    out = state.copy()
    out.F = F
    out.time = state.time + dt
    return out


# --------------------------------------------------------------------------
# residual diagnostics
# --------------------------------------------------------------------------

def _material_derivative(A_old: fl.TensorField, A_new: fl.TensorField, u, dt):
    """Return ``(D_t A, midpoint A)`` as full matrices, physical values."""
    old_dep = advect_semi_lagrangian(A_old, u, dt)
    a0, a1 = old_dep.physical(), A_new.physical()
    return (a1 - a0) / dt, 0.5 * (a0 + a1)


def rate_terms(kind: RateKind, A: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Algebraic part of an objective rate, ``G[..., a, b] = d u_a / d x_b``."""
    kind = RateKind(kind)
    Gt = tc.transpose(G)
    if kind is RateKind.COROTATIONAL:
        W = tc.skew(G)
        return A @ W - W @ A
    if kind is RateKind.LOWER_CONVECTED:
        return A @ G + Gt @ A
    return -(G @ A) - A @ Gt


def objective_rate_residual(kind, A_old: fl.TensorField, A_new: fl.TensorField,
                            u: fl.VectorField, dt: float) -> fl.TensorField:
    """
    Objective rate of a tensor field from two consecutive snapshots.

    The material derivative is a semi-Lagrangian difference and the
    algebraic terms use the average of the departure and arrival values.
    With this package's gradient convention the contravariant and
    upper-convected rates coincide; both vanish along exact ``B`` transport.
    """
    DtA, Am = _material_derivative(A_old, A_new, u, dt)
    G = fl.velocity_gradient(u)
    return fl.TensorField(A_new.grid, tc.sym(DtA + rate_terms(kind, Am, G)), chart=False)


@dataclass
class LogEvolutionReport:
    residual: fl.TensorField
    l2: float
    skipped: int


def log_evolution_residual(old: TransportState, new: TransportState, u: fl.VectorField,
                           dt: float) -> LogEvolutionReport:
    """
    Residual of ``D_t log B = Omega log B - log B Omega + 2 S``.

    Cells where ``B`` has a repeated eigenvalue are skipped (their residual
    is set to zero) and counted.
    """
    grid = old.grid
    dep = advect_semi_lagrangian(old.L, u, dt)
    L0, L1 = dep.matrices(), new.L.matrices()
    DtL = (L1 - L0) / dt
    Lm = 0.5 * (L0 + L1)
    G = fl.velocity_gradient(u)
    B = tc.mat_exp_sym(Lm)
    dec = tc.eig_sym(B)
    degenerate = np.any(dec.labels[..., 1:] == dec.labels[..., :-1], axis=-1)
    res = np.zeros_like(DtL)
    ok = ~degenerate
    if np.any(ok):
        sub = tc.SpectralDecomp(dec.eigenvalues[ok], dec.eigenvectors[ok], dec.labels[ok])
        Om, _, S = cm.decompose_grad(None, G[ok], decomp=sub)
        Lk = Lm[ok]
        res[ok] = DtL[ok] - (Om @ Lk - Lk @ Om + 2.0 * S)
    field_ = fl.TensorField(grid, tc.sym(res), chart=False)
    return LogEvolutionReport(field_, fl.l2_norm(field_), int(np.sum(degenerate)))


def commutator_norm(state: TransportState) -> float:
    """``max_cells ||[B, B_ref]||_F``."""
    if state.L_ref is None:
        return 0.0
    B, Br = state.B(), state.B_ref()
    C = B @ Br - Br @ B
    return float(np.max(tc.frobenius(C)))


def det_error(state: TransportState) -> float:
    """Largest ``|det B - 1|`` and ``|det B_ref - 1|`` over the cells."""
    err = float(np.max(np.abs(tc.det(state.B()) - 1.0)))
    if state.L_ref is not None:
        err = max(err, float(np.max(np.abs(tc.det(state.B_ref()) - 1.0))))
    return err
