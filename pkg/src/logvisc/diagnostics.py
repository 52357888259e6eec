"""
Energy accounting, a priori bounds and constraint residuals.

Time integrals are accumulated with compensated summation.  The gradient
integral entering the a priori bounds and the plastic dissipation use the
trapezoid rule; the viscous dissipation uses the end-of-step strain rate,
which is the quantity the backward-Euler viscous solve actually removes.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from . import fields as fl
from . import tensor_core as tc
from . import transport as tr

CSV_HEADER = ("t,kinetic,elastic,viscous_cum,plastic_cum,det_err_max,div_err_max,"
              "b33_lhs,b33_rhs,b52_lhs,b52_rhs")


class KahanSum:
    """Compensated running sum whose full state can be saved and restored."""

    __slots__ = ("total", "comp")

    def __init__(self, total: float = 0.0, comp: float = 0.0):
        self.total = float(total)
        self.comp = float(comp)

    def add(self, x: float) -> None:
        y = float(x) - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t

    @property
    def value(self) -> float:
        return self.total

    def state(self) -> tuple:
        return (self.total, self.comp)


@dataclass
class EnergyRecord:
    t: float
    kinetic: float
    elastic: float
    viscous_cum: float
    plastic_cum: float
    det_err_max: float
    div_err_max: float
    b33_lhs: float
    b33_rhs: float
    b52_lhs: float
    b52_rhs: float

    def csv_row(self) -> str:
        return ",".join(repr(float(v)) for v in astuple(self))

    @property
    def total(self) -> float:
        """Energy inequality left-hand side."""
        return self.kinetic + self.elastic + self.viscous_cum + self.plastic_cum


RECORD_FIELDS = [f.name for f in fields(EnergyRecord)]


def write_csv(path, series) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in series:
            fh.write(rec.csv_row() + "\n")


def read_csv(path) -> list:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected diagnostics header")
        return [EnergyRecord(*(float(v) for v in line.split(","))) for line in fh if line.strip()]


class Accumulators:
    """
    Running time integrals and maxima entering the energy records.

    Parameters
    ----------
    rho, eta, kappa : float
    tau_r : float or None
        Relaxation time; ``None`` disables the relaxed-strain terms.
    """

    def __init__(self, rho, eta, kappa, tau_r=None):
        self.rho, self.eta, self.kappa, self.tau_r = rho, eta, kappa, tau_r
        self.t = 0.0
        self.viscous = KahanSum()
        self.plastic = KahanSum()
        self.grad_int = KahanSum()
        self.L0_sq = 0.0
        self.L_max_sq = 0.0
        self.Lref_max_sq = 0.0
        self.last_grad_sq = 0.0
        self.last_diff_sq = 0.0
        self.kinetic0 = 0.0
        self.elastic0 = 0.0

    def start(self, state: tr.TransportState, u: fl.VectorField) -> None:
        self.t = state.time
        self.L0_sq = fl.l2_norm_sq(state.L)
        self.L_max_sq = self.L0_sq
        self.Lref_max_sq = fl.l2_norm_sq(state.L_ref) if state.L_ref is not None else 0.0
        self.last_grad_sq = fl.grad_norm_sq(u)
        self.last_diff_sq = fl.tensor_l2_norm_sq(state.grid, state.log_difference())
        self.kinetic0 = self.rho * fl.l2_norm_sq(u)
        self.elastic0 = 0.5 * self.kappa * self.last_diff_sq

    def advance(self, dt: float, state: tr.TransportState, u: fl.VectorField) -> None:
        """Account for a step of length ``dt`` ending at ``state`` with velocity ``u``."""
        g = fl.grad_norm_sq(u)
        self.grad_int.add(0.5 * dt * (self.last_grad_sq + g))
        self.last_grad_sq = g
        self.viscous.add(4.0 * self.eta * dt * fl.strain_norm_sq(u))
        diff = fl.tensor_l2_norm_sq(state.grid, state.log_difference())
        if self.tau_r is not None and state.L_ref is not None:
            self.plastic.add((2.0 * self.kappa / self.tau_r) * dt * 0.5 * (self.last_diff_sq + diff))
        self.last_diff_sq = diff
        self.L_max_sq = max(self.L_max_sq, fl.l2_norm_sq(state.L))
        if state.L_ref is not None:
            self.Lref_max_sq = max(self.Lref_max_sq, fl.l2_norm_sq(state.L_ref))
        self.t = state.time

    # checkpoint support
    _SCALARS = ("t", "L0_sq", "L_max_sq", "Lref_max_sq", "last_grad_sq", "last_diff_sq",
                "kinetic0", "elastic0")

    def to_array(self) -> np.ndarray:
        vals = [getattr(self, k) for k in self._SCALARS]
        for s in (self.viscous, self.plastic, self.grad_int):
            vals.extend(s.state())
        return np.array(vals, dtype=float)

    def load_array(self, arr) -> None:
        arr = [float(v) for v in arr]
        n = len(self._SCALARS)
        for k, v in zip(self._SCALARS, arr[:n]):
            setattr(self, k, v)
        self.viscous = KahanSum(*arr[n:n + 2])
        self.plastic = KahanSum(*arr[n + 2:n + 4])
        self.grad_int = KahanSum(*arr[n + 4:n + 6])


def record(state: tr.TransportState, u: fl.VectorField, acc: Accumulators) -> EnergyRecord:
    """Energy record of the current snapshot."""
    t = state.time
    kinetic = acc.rho * fl.l2_norm_sq(u)
    elastic = 0.5 * acc.kappa * fl.tensor_l2_norm_sq(state.grid, state.log_difference())
    det_err = tr.det_error(state)
    div_err = float(np.max(np.abs(fl.divergence(u))))
    gi = acc.grad_int.value
    b33_rhs = 16.0 * t * gi + 2.0 * acc.L0_sq
    if acc.tau_r is not None and state.L_ref is not None:
        b52_lhs = acc.Lref_max_sq
        b52_rhs = 32.0 * t * gi + 32.0 * t * t / acc.tau_r ** 2 * acc.L_max_sq + 2.0 * acc.L0_sq
    else:
        b52_lhs = b52_rhs = 0.0
    return EnergyRecord(t, kinetic, elastic, acc.viscous.value, acc.plastic.value,
                        det_err, div_err, acc.L_max_sq, b33_rhs, b52_lhs, b52_rhs)


@dataclass
class CheckReport:
    passed: bool
    worst_ratio: float
    worst_t: float
    detail: str = ""


def check_energy_inequality(series, mode: str = "solid", margin: float = 0.05) -> CheckReport:
    """
    Check ``kinetic + elastic + dissipated <= initial energy * (1 + margin)``.

    In fluid mode the plastic dissipation is included on the left.  The
    right-hand side is the initial kinetic plus elastic energy; with equal
    initial strains it reduces to the initial kinetic energy.
    """
    if not series:
        return CheckReport(True, 0.0, 0.0, "empty series")
    r0 = series[0]
    rhs = r0.kinetic + r0.elastic
    worst, worst_t = -math.inf, r0.t
    for rec in series:
        lhs = rec.kinetic + rec.elastic + rec.viscous_cum
        if mode == "fluid":
            lhs += rec.plastic_cum
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs <= 0 else math.inf)
        if ratio > worst:
            worst, worst_t = ratio, rec.t
    return CheckReport(worst <= 1.0 + margin, worst, worst_t)


def check_apriori_bounds(series, margin: float = 0.05, include_52: bool = True) -> CheckReport:
    """Check the log-strain bounds at every record with the given margin."""
    worst, worst_t, which = -math.inf, 0.0, ""
    for rec in series:
        pairs = [("b33", rec.b33_lhs, rec.b33_rhs)]
        if include_52:
            pairs.append(("b52", rec.b52_lhs, rec.b52_rhs))
        for name, lhs, rhs in pairs:
            if rhs <= 0:
                ratio = 0.0 if lhs <= 0 else math.inf
            else:
                ratio = lhs / rhs
            if ratio > worst:
                worst, worst_t, which = ratio, rec.t, name
    return CheckReport(worst <= 1.0 + margin, worst, worst_t, which)


def energy_monotonicity(series, rel_tol: float = 1e-6, skip: int = 1, mode: str = "solid") -> CheckReport:
    """Largest relative per-record increase of the total energy after ``skip`` records."""
    worst, worst_t = -math.inf, 0.0
    for a, b in zip(series[skip:], series[skip + 1:]):
        ea = a.kinetic + a.elastic + a.viscous_cum + (a.plastic_cum if mode == "fluid" else 0.0)
        eb = b.kinetic + b.elastic + b.viscous_cum + (b.plastic_cum if mode == "fluid" else 0.0)
        rel = (eb - ea) / ea if ea > 0 else 0.0
        if rel > worst:
            worst, worst_t = rel, b.t
    return CheckReport(worst <= rel_tol, worst, worst_t)


# --------------------------------------------------------------------------
# constraint residuals
# --------------------------------------------------------------------------

def _constraint_rate_density(state: tr.TransportState, u: fl.VectorField):
    B = state.B()
    Binv = tc.inverse_spd(B)
    G = fl.velocity_gradient(u)
    rate = G @ B + B @ tc.transpose(G)
    return np.trace(Binv @ rate, axis1=-2, axis2=-1), np.trace(G, axis1=-2, axis2=-1)


def tangency_residual(state: tr.TransportState, u: fl.VectorField) -> float:
    """
    L1 total of ``tr(B^-1 (grad u B + B grad u^T))`` over the cells.

    This is the rate of change of ``log det B`` under the transport
    source; it vanishes for divergence-free velocities and equals twice the
    L1 norm of the divergence otherwise.
    """
    dens, _ = _constraint_rate_density(state, u)
    return fl.compensated_sum(np.abs(dens)) * state.grid.cell_volume


def tangency_defect(state: tr.TransportState, u: fl.VectorField) -> float:
    """L1 total of ``tr(B^-1 (grad u B + B grad u^T)) - 2 tr grad u``."""
    dens, trg = _constraint_rate_density(state, u)
    return fl.compensated_sum(np.abs(dens - 2.0 * trg)) * state.grid.cell_volume


def divergence_l1(u: fl.VectorField) -> float:
    """L1 norm of the cell-centred velocity-gradient trace."""
    trg = np.trace(fl.velocity_gradient(u), axis1=-2, axis2=-1)
    return fl.compensated_sum(np.abs(trg)) * u.grid.cell_volume
