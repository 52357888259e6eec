"""
Time loop, outputs and checkpoint/restart.

A step first advances the velocity with the strain fields of the old time
and then transports the strains with the new velocity.  Prescribed-flow
scenarios and the ``transport_only`` model skip the momentum update.
"""
from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import diagnostics as dg
from . import fields as fl
from . import flow
from . import scenarios
from . import transport as tr
from .config import SimConfig, config_hash, dump_config, parse_config_text
from .errors import CheckpointError, LogViscError

CHECKPOINT_MAGIC = "logvisc-checkpoint v1"


@dataclass
class RunResult:
    records: list
    state: tr.TransportState
    u: fl.VectorField
    steps: int
    dt: float
    history: list = field(default_factory=list)


class Simulation:
    """
    One configured run.

    Parameters
    ----------
    cfg : SimConfig
    keep_history : bool
        Keep ``(state, u)`` after every recorded step in memory.
    """

    def __init__(self, cfg: SimConfig, keep_history: bool = False):
        self.cfg = cfg
        self.setup = scenarios.build(cfg)
        s = self.setup
        self.grid = s.grid
        self.state = s.state
        self.u = s.u
        self.p = fl.ScalarField(self.grid)
        self.step_index = 0
        self.records = []
        self.keep_history = keep_history
        self.history = []
        self.acc = dg.Accumulators(s.params.rho, s.params.eta, s.params.kappa, s.tau_r)
        self.acc.start(self.state, self.u)
        self.dt = self._initial_dt()
        self.n_steps = max(1, int(math.ceil(cfg.t_end / self.dt - 1e-9)))
        self.dt = cfg.t_end / self.n_steps
        self.records.append(dg.record(self.state, self.u, self.acc))
        if keep_history:
            self.history.append((self.state.copy(), self.u.copy()))

    @property
    def flow_active(self) -> bool:
        return not self.setup.prescribed

    def _initial_dt(self) -> float:
        cfg = self.cfg
        if cfg.dt > 0:
            return min(cfg.dt, cfg.t_end)
        params = self.setup.params
        if not self.flow_active:
            # no elastic waves without momentum coupling
            params = dataclasses.replace(params, kappa=0.0)
        dt = flow.cfl_dt(self.u, params, self.grid, cfg.cfl, explicit_viscosity=False)
        if self.flow_active and params.body_force is not None:
            # a forced flow accelerates from rest; bound by the forcing time scale
            fmax = params.body_force.max_abs()
            if fmax > 0:
                dt = min(dt, cfg.cfl * math.sqrt(min(self.grid.dx) / fmax))
        if not math.isfinite(dt):
            dt = cfg.t_end / 100.0
        return min(dt, cfg.t_end)

    # --- stepping ---------------------------------------------------------
    def step(self) -> None:
        dt = self.dt
        s = self.setup
        if self.flow_active:
            model = "fluid" if s.model == "fluid" else "solid"
            self.u, self.p = flow.momentum_step(self.u, self.p, self.state, s.params, dt, model)
        self.state = tr.step_transport(self.state, self.u, dt, s.tau_r)
        self.step_index += 1
        self.state.time = self.step_index * dt
        self.acc.advance(dt, self.state, self.u)
        last = self.step_index == self.n_steps
        if self.step_index % self.cfg.record_every == 0 or last:
            self.records.append(dg.record(self.state, self.u, self.acc))
            if self.keep_history:
                self.history.append((self.state.copy(), self.u.copy()))

    def run(self, outputs: bool = False, stop_after: int | None = None) -> RunResult:
        """
        Advance to ``t_end`` (or ``stop_after`` further steps).

        With ``outputs`` the diagnostics CSV, snapshots, checkpoints and the
        manifest are written below ``cfg.output_dir``.
        """
        cfg = self.cfg
        if outputs:
            os.makedirs(cfg.output_dir, exist_ok=True)
        done = 0
        while self.step_index < self.n_steps:
            if stop_after is not None and done >= stop_after:
                break
            try:
                self.step()
            except LogViscError as exc:
                raise type(exc)(f"step {self.step_index + 1}: {exc}") from exc
            done += 1
            if outputs:
                k = self.step_index
                if cfg.snapshot_every and k % cfg.snapshot_every == 0:
                    self.write_snapshots()
                if cfg.checkpoint_every and k % cfg.checkpoint_every == 0:
                    self.write_checkpoint(os.path.join(cfg.output_dir, "checkpoint.npz"))
        if outputs:
            dg.write_csv(os.path.join(cfg.output_dir, "diagnostics.csv"), self.records)
            self.write_manifest()
        return RunResult(self.records, self.state, self.u, self.step_index, self.dt, self.history)

    # --- outputs ----------------------------------------------------------
    def write_snapshots(self) -> None:
        d = os.path.join(self.cfg.output_dir, "snapshots")
        os.makedirs(d, exist_ok=True)
        k = self.step_index
        fl.write_snapshot(os.path.join(d, f"logB_{k:06d}.bin"), self.state.L)
        if self.state.L_ref is not None:
            fl.write_snapshot(os.path.join(d, f"logBref_{k:06d}.bin"), self.state.L_ref)
        fl.write_snapshot(os.path.join(d, f"u_{k:06d}.bin"), self.u)
        fl.write_snapshot(os.path.join(d, f"p_{k:06d}.bin"), self.p)

    def write_manifest(self, extra: dict | None = None) -> None:
        info = {
            "code_version": __version__,
            "config_hash": config_hash(self.cfg),
            "model": self.cfg.model,
            "scenario": self.cfg.scenario,
            "steps": self.step_index,
            "dt": self.dt,
            "t": self.state.time,
        }
        if extra:
            info.update(extra)
        with open(os.path.join(self.cfg.output_dir, "manifest.json"), "w") as fh:
            json.dump(info, fh, indent=2, sort_keys=True)
            fh.write("\n")

    # --- checkpoints ------------------------------------------------------
    def write_checkpoint(self, path) -> None:
        text = dump_config(self.cfg)
        arrays = {
            "L": self.state.L.data,
            "u": self.u.flat(),
            "p": self.p.data,
            "acc": self.acc.to_array(),
            "records": np.array([[getattr(r, k) for k in dg.RECORD_FIELDS] for r in self.records]),
            "meta": np.array([self.step_index, self.n_steps], dtype=np.int64),
            "dt": np.array([self.dt, self.state.time]),
        }
        if self.state.L_ref is not None:
            arrays["L_ref"] = self.state.L_ref.data
        if self.state.F is not None:
            arrays["F"] = self.state.F
        header = json.dumps({"magic": CHECKPOINT_MAGIC, "config": text,
                             "config_hash": config_hash(self.cfg), "version": __version__})
        arrays["header"] = np.frombuffer(header.encode(), dtype=np.uint8)
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        payload = buf.getvalue()
        tmp = f"{path}.tmp"
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)

    @classmethod
    def from_checkpoint(cls, path, expected_hash: str | None = None) -> "Simulation":
        """
        Rebuild a run from a checkpoint.

        Raises
        ------
        CheckpointError
            If the file is not a checkpoint, is damaged, or was written by a
            different configuration than ``expected_hash``.
        """
        try:
            with np.load(path, allow_pickle=False) as z:
                data = {k: z[k] for k in z.files}
            header = json.loads(bytes(data["header"]).decode())
        except Exception as exc:  # noqa: BLE001 - any read failure means a bad file
            raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from None
        if header.get("magic") != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: bad checkpoint header")
        cfg = parse_config_text(header["config"])
        h = config_hash(cfg)
        if h != header.get("config_hash"):
            raise CheckpointError(f"{path}: stored configuration does not match its hash")
        if expected_hash is not None and expected_hash != h:
            raise CheckpointError(f"{path}: checkpoint belongs to a different configuration")
        sim = cls(cfg)
        g = sim.grid
        sim.state = tr.TransportState(
            fl.TensorField(g, data["L"]),
            fl.TensorField(g, data["L_ref"]) if "L_ref" in data else None,
            data["F"] if "F" in data else None,
            float(data["dt"][1]),
        )
        exact = sim.u.exact_gradient
        sim.u = fl.VectorField.from_flat(g, data["u"])
        sim.u.exact_gradient = exact
        sim.p = fl.ScalarField(g, data["p"])
        sim.acc.load_array(data["acc"])
        sim.records = [dg.EnergyRecord(*row) for row in data["records"].tolist()]
        sim.step_index, sim.n_steps = (int(v) for v in data["meta"])
        sim.dt = float(data["dt"][0])
        return sim


def file_sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
