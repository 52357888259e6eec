"""Initial-condition generators for the shipped scenarios."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fields as fl
from . import flow
from . import tensor_core as tc
from . import transport as tr
from .config import SimConfig
from .errors import ConfigError
from .rng import Lcg64

PRESCRIBED = ("uniform_shear_prescribed", "rigid_rotation_prescribed")

_NATURAL_BOUNDARY = {
    "rest_strained": fl.WALLS,
    "lid_cavity": fl.WALLS,
    "taylor_green": fl.PERIODIC,
    "uniform_shear_prescribed": fl.PERIODIC,
    "relaxation_uniform": fl.PERIODIC,
    "rigid_rotation_prescribed": fl.PERIODIC,
}
_DEFAULT_AMPLITUDE = {
    "rest_strained": 0.5, "lid_cavity": 0.0, "taylor_green": 0.0,
    "uniform_shear_prescribed": 0.3, "relaxation_uniform": 1.0, "rigid_rotation_prescribed": 1.0,
}
_DEFAULT_VELOCITY = {
    "rest_strained": 0.0, "lid_cavity": 1.0, "taylor_green": 0.1,
    "uniform_shear_prescribed": 1.0, "relaxation_uniform": 0.0,
    "rigid_rotation_prescribed": 2.0 * math.pi,
}


@dataclass
class Setup:
    """Everything a run needs at ``t = 0``."""

    grid: fl.Grid
    state: tr.TransportState
    u: fl.VectorField
    params: flow.FlowParams
    model: str
    tau_r: float | None
    prescribed: bool
    amplitude: float
    velocity: float


def scenario_amplitude(cfg: SimConfig) -> float:
    return _DEFAULT_AMPLITUDE[cfg.scenario] if cfg.amplitude is None else cfg.amplitude


def scenario_velocity(cfg: SimConfig) -> float:
    return _DEFAULT_VELOCITY[cfg.scenario] if cfg.velocity is None else cfg.velocity


def make_grid(cfg: SimConfig) -> fl.Grid:
    default_len = 2.0 * math.pi if cfg.scenario == "taylor_green" else 1.0
    lengths = [cfg.lx, cfg.ly, cfg.lz][:cfg.d]
    lengths = [default_len if v is None else v for v in lengths]
    shape = [cfg.nx, cfg.ny, cfg.nz][:cfg.d]
    boundary = _NATURAL_BOUNDARY[cfg.scenario] if cfg.boundary == "auto" else cfg.boundary
    try:
        return fl.Grid(tuple(shape), tuple(lengths), boundary)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def velocity_from_streamfunction(grid: fl.Grid, psi_func) -> fl.VectorField:
    """
    Discretely divergence-free 2D velocity ``(d psi/dy, -d psi/dx)``.

    ``psi`` is sampled at the grid nodes; on walled grids it must vanish on
    the boundary so that the normal velocity does.
    """
    if grid.d != 2:
        raise ValueError("streamfunction velocities are two-dimensional")
    xn, yn = grid.axis_coords(0, "node"), grid.axis_coords(1, "node")
    X, Y = np.meshgrid(xn, yn, indexing="ij")
    psi = np.asarray(psi_func(X, Y), dtype=float)
    hx, hy = grid.dx
    if grid.periodic:
        ux = (np.roll(psi, -1, axis=1) - psi) / hy
        uy = -(np.roll(psi, -1, axis=0) - psi) / hx
    else:
        ux = (psi[:, 1:] - psi[:, :-1]) / hy
        uy = -(psi[1:, :] - psi[:-1, :]) / hx
        ux[0, :] = ux[-1, :] = 0.0
        uy[:, 0] = uy[:, -1] = 0.0
    return fl.VectorField(grid, [ux, uy])


def _pattern(d: int) -> np.ndarray:
    M = np.zeros((d, d))
    M[0, 0], M[1, 1] = 1.0, -1.0
    M[0, 1] = M[1, 0] = 0.5
    if d == 3:
        M[2, 2] = -0.3
        M[1, 2] = M[2, 1] = 0.2
    M = tc.deviator(M)
    return M / tc.frobenius(M)


def _noise(cfg: SimConfig, grid: fl.Grid) -> np.ndarray:
    if cfg.noise == 0:
        return np.zeros(grid.shape + (grid.d, grid.d))
    gen = Lcg64(cfg.seed)
    raw = gen.uniform(grid.shape + (tc.n_components(grid.d),), -1.0, 1.0)
    F = fl.mollify_log_field(fl.TensorField(grid, tc.pack(tc.deviator(tc.unpack(raw, grid.d)))), 2.0)
    M = F.matrices()
    peak = float(np.max(tc.frobenius(M)))
    return cfg.noise * M / peak if peak > 0 else M


def _rest_strained(cfg, grid, amp):
    x = grid.cell_centers()
    c = np.array(grid.lengths) / 2.0
    w = cfg.width * min(grid.lengths)
    r2 = np.sum((x - c) ** 2, axis=-1)
    bump = np.exp(-r2 / (2.0 * w * w))
    return amp * bump[..., None, None] * _pattern(grid.d)


def _shear_strain(grid, amp):
    x = grid.cell_centers()
    kx, ky = 2 * math.pi / grid.lengths[0], 2 * math.pi / grid.lengths[1]
    a = np.cos(kx * x[..., 0]) * np.sin(ky * x[..., 1])
    b = 0.5 * np.sin(kx * x[..., 0] + ky * x[..., 1])
    d = grid.d
    M = np.zeros(grid.shape + (d, d))
    M[..., 0, 0], M[..., 1, 1] = a, -a
    M[..., 0, 1] = M[..., 1, 0] = b
    return amp * tc.deviator(M)


def build(cfg: SimConfig) -> Setup:
    """Grid, initial fields and parameters of the configured scenario."""
    grid = make_grid(cfg)
    d = grid.d
    amp = scenario_amplitude(cfg)
    vel = scenario_velocity(cfg)
    kappa = cfg.kappa
    body = None
    u = fl.VectorField.zeros(grid)
    L0 = np.zeros(grid.shape + (d, d))
    Lref0 = None
    scen = cfg.scenario
    if scen != "rest_strained" and scen not in PRESCRIBED and scen != "relaxation_uniform" and d != 2:
        raise ConfigError(f"scenario {scen} is two-dimensional")

    if scen == "rest_strained":
        L0 = _rest_strained(cfg, grid, amp)
        if vel != 0:
            if d != 2:
                raise ConfigError("an initial velocity for rest_strained needs d = 2")
            lx, ly = grid.lengths
            u = velocity_from_streamfunction(
                grid, lambda X, Y: vel * ly / math.pi * (np.sin(math.pi * X / lx) * np.sin(math.pi * Y / ly)) ** 2)
    elif scen == "taylor_green":
        lx, ly = grid.lengths
        kx, ky = 2 * math.pi / lx, 2 * math.pi / ly
        u = velocity_from_streamfunction(grid, lambda X, Y: vel / ky * np.sin(kx * X) * np.sin(ky * Y))
        L0 = amp * np.zeros_like(L0)
    elif scen == "lid_cavity":
        band = 0.9 * grid.lengths[1]

        def force(x):
            f = np.zeros(x.shape)
            f[..., 0] = np.where(x[..., 1] > band, vel, 0.0)
            return f

        body = fl.VectorField.from_function(grid, force)
        L0 = _rest_strained(cfg, grid, amp)
    elif scen == "uniform_shear_prescribed":
        if d != 2:
            raise ConfigError("uniform_shear_prescribed is two-dimensional")
        ly = grid.lengths[1]

        def shear(x):
            v = np.zeros(x.shape)
            v[..., 0] = vel * np.sin(2 * math.pi * x[..., 1] / ly)
            return v

        u = fl.VectorField.from_function(grid, shear)
        L0 = _shear_strain(grid, amp)
    elif scen == "relaxation_uniform":
        D = np.zeros((d, d))
        D[0, 0], D[1, 1] = amp, -amp
        L0 = np.broadcast_to(D, grid.shape + (d, d)).copy()
        Lref0 = np.zeros_like(L0)
    elif scen == "rigid_rotation_prescribed":
        if d != 2:
            raise ConfigError("rigid_rotation_prescribed is two-dimensional")
        th = 0.3
        R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        Lc = R @ np.diag([amp, -amp]) @ R.T
        L0 = np.broadcast_to(Lc, grid.shape + (2, 2)).copy()
        c = np.array(grid.lengths) / 2.0
        W = np.array([[0.0, -vel], [vel, 0.0]])

        def rotation(x):
            return (x - c) @ W.T

        u = fl.VectorField.from_function(grid, rotation, exact_gradient=W)

    L0 = L0 + _noise(cfg, grid)
    Lf = fl.TensorField(grid, tc.pack(L0))
    if cfg.mollify_scale > 0:
        Lf = fl.mollify_log_field(Lf, cfg.mollify_scale)
    Lref = None
    if cfg.uses_bref:
        Lref = Lf.copy() if Lref0 is None else fl.TensorField(grid, tc.pack(Lref0))
    F = None
    if cfg.track_F:
        F = tc.mat_exp_sym(0.5 * Lf.matrices())
    state = tr.TransportState(Lf, Lref, F, 0.0)
    params = flow.FlowParams(cfg.rho, cfg.eta, kappa, body, cfg.stabilization)
    return Setup(grid, state, u, params, cfg.model, cfg.tau_r if cfg.uses_bref else None,
                 scen in PRESCRIBED or cfg.model == "transport_only", amp, vel)
