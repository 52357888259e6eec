"""
Incompressible momentum update on the MAC grid.

A step advects the velocity semi-Lagrangianly, adds the explicit elastic and
body forces, and then solves the backward-Euler Stokes system

    (I - dt nu Lap) u + grad phi = r,    div u = 0,

in one sparse factorisation.  The velocity that leaves the step is exactly
discretely divergence-free and the viscous term acts on that same velocity,
so the discrete energy balance closes without a splitting remainder.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fields as fl
from . import transport as tr
from .errors import PoissonError

SOLVE_RTOL = 1e-10


@dataclass
class FlowParams:
    """Physical parameters of the momentum balance.

    Attributes
    ----------
    rho : float
        Mass density.
    eta : float
        Dynamic viscosity.
    kappa : float
        Elastic modulus; 0 gives Navier-Stokes.
    body_force : VectorField, optional
        Force per unit mass on the faces.
    stabilization : float
        Factor ``theta`` of the implicit elastic correction: the viscous
        solve uses ``eta + theta * kappa * dt``.  This absorbs the first
        order growth of elastic energy that an explicit stress would
        otherwise produce; it vanishes as ``dt -> 0``.
    """

    rho: float = 1.0
    eta: float = 1.0
    kappa: float = 1.0
    body_force: object = None
    stabilization: float = 1.0

    def __post_init__(self):
        if not (self.rho > 0 and self.eta > 0):
            raise ValueError("rho and eta must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")


def elastic_stress(state: tr.TransportState, kappa: float, model: str = "solid") -> fl.TensorField:
    """``kappa log B`` (solid) or ``kappa (log B - log B_ref)`` (fluid)."""
    if model == "solid" or state.L_ref is None:
        M = state.L.matrices()
    elif model == "fluid":
        M = state.L.matrices() - state.L_ref.matrices()
    else:
        raise ValueError(f"unknown model {model!r}")
    return fl.TensorField(state.grid, kappa * M, chart=False)


class _Factorization:
    def __init__(self, A):
        self.A = sp.csc_matrix(A)
        self.lu = spla.splu(self.A)

    def solve(self, b, what):
        x = self.lu.solve(b)
        res = self.A @ x - b
        scale = max(float(np.linalg.norm(b)), 1e-300)
        rel = float(np.linalg.norm(res)) / scale
        if not np.isfinite(rel) or (rel > SOLVE_RTOL and float(np.linalg.norm(b)) > 0):
            raise PoissonError(f"{what} solve missed its tolerance: relative residual {rel:.3e}")
        return x


@functools.lru_cache(maxsize=8)
def _stokes_factor(grid: fl.Grid, coef: float) -> _Factorization:
    ops = fl.operators(grid)
    P = ops.P
    lap = P.T @ ops.lap @ P
    n = lap.shape[0]
    Mv = sp.identity(n, format="csr") - coef * lap
    Gi = P.T @ ops.grad
    Di = ops.div @ P
    e = sp.csr_matrix(np.ones((grid.ncells, 1)))
    A = sp.bmat([[Mv, Gi, None], [Di, None, e], [None, e.T, None]], format="csc")
    return _Factorization(A)


@functools.lru_cache(maxsize=8)
def _poisson_factor(grid: fl.Grid) -> _Factorization:
    ops = fl.operators(grid)
    Gi = ops.P.T @ ops.grad
    Di = ops.div @ ops.P
    e = sp.csr_matrix(np.ones((grid.ncells, 1)))
    A = sp.bmat([[Di @ Gi, e], [e.T, None]], format="csc")
    return _Factorization(A)


def project(u: fl.VectorField) -> tuple:
    """
    Pressure projection onto discretely divergence-free fields.

    Returns ``(u_projected, phi)`` with ``u_projected = u - grad phi`` and
    ``phi`` of zero mean.
    """
    grid = u.grid
    ops = fl.operators(grid)
    fac = _poisson_factor(grid)
    rhs = np.concatenate([ops.div @ u.flat(), [0.0]])
    sol = fac.solve(rhs, "pressure Poisson")
    phi = sol[:-1]
    flat = u.flat() - ops.grad @ phi
    out = fl.VectorField.from_flat(grid, flat)
    _clear_walls(out)
    return out, phi.reshape(grid.shape)


def _clear_walls(u: fl.VectorField) -> None:
    if not u.grid.periodic:
        for a, c in enumerate(u.components):
            fl._zero_boundary_faces(c, a)


def advect_velocity(u: fl.VectorField, dt: float) -> fl.VectorField:
    """Semi-Lagrangian self-advection of the staggered velocity."""
    if dt == 0.0 or tr._is_static(u):
        return u.copy()
    grid = u.grid
    comps = []
    for a in range(grid.d):
        x = grid.face_centers(a)
        dep = tr.backtrace(u, x, dt)
        comps.append(fl.interpolate_face_component(u, a, dep))
    out = fl.VectorField(grid, comps)
    _clear_walls(out)
    return out


def momentum_step(u: fl.VectorField, p, state: tr.TransportState, params: FlowParams,
                  dt: float, model: str = "solid"):
    """
    Advance the velocity by one step.

    Parameters
    ----------
    u : VectorField
        Discretely divergence-free velocity at the old time.
    p : ScalarField or None
        Old pressure; unused by the scheme, accepted for symmetry.
    state : TransportState
        Strain fields at the old time (explicit elastic stress).
    params : FlowParams
    dt : float
    model : {"solid", "fluid"}

    Returns
    -------
    (VectorField, ScalarField)
        New divergence-free velocity and the pressure.
    """
    grid = u.grid
    ops = fl.operators(grid)
    rhs = advect_velocity(u, dt).flat()
    if params.kappa > 0:
        T = elastic_stress(state, params.kappa, model)
        rhs = rhs + (dt / params.rho) * fl.tensor_divergence(T).flat()
    if params.body_force is not None:
        rhs = rhs + dt * params.body_force.flat()
    nu = (params.eta + params.stabilization * params.kappa * dt) / params.rho
    fac = _stokes_factor(grid, float(dt * nu))
    b = np.concatenate([ops.P.T @ rhs, np.zeros(grid.ncells + 1)])
    sol = fac.solve(b, "Stokes")
    ni = ops.interior.size
    flat = np.zeros(ops.n_vel)
    flat[ops.interior] = sol[:ni]
    phi = sol[ni:ni + grid.ncells].reshape(grid.shape)
    return fl.VectorField.from_flat(grid, flat), fl.ScalarField(grid, params.rho * phi / dt)


def cfl_dt(u: fl.VectorField, params: FlowParams, grid: fl.Grid, cfl: float = 0.5,
           explicit_viscosity: bool = True) -> float:
    """
    Stable step estimate: ``cfl * min(advective, viscous, elastic-wave)``.

    The viscous limit ``rho dx^2 / (4 eta)`` is included only for explicit
    viscosity; the elastic limit is ``dx sqrt(rho / kappa) / 2`` when
    ``kappa > 0``.  Returns ``inf`` when no limit applies.
    """
    h = min(grid.dx)
    limits = []
    umax = max((float(np.max(np.abs(c))) / hx for c, hx in zip(u.components, grid.dx)), default=0.0)
    if umax > 0:
        limits.append(1.0 / umax)
    if explicit_viscosity:
        limits.append(params.rho * h * h / (4.0 * params.eta))
    if params.kappa > 0:
        limits.append(0.5 * h * math.sqrt(params.rho / params.kappa))
    return cfl * min(limits) if limits else math.inf
