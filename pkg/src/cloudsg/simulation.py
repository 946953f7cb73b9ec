"""Coupled time loop: flow and cloud physics joined by Strang splitting.

Each step advances the flow a half step (IMEX), integrates the cloud system
over the full step (adaptive stabilized RK with substepping), then advances
the flow another half step. The latent heating seen by the flow is refreshed
from the current cloud state before each half step.
"""

import csv
import json
import time

import numpy as np

from cloudsg import gpc, scenarios
from cloudsg.cloud import CloudSolver, stabilized_rk_integrate
from cloudsg.config import RunConfig
from cloudsg.constants import PhysConsts
from cloudsg.flow import FlowState, NSSolver
from cloudsg.grid import field_norms

SNAPSHOT_VERSION = 1
CLOUD_NAMES = ("q_v", "q_c", "q_r")


class SimulationError(RuntimeError):
    """Solver failure annotated with the failing time and stage."""

    def __init__(self, stage, t, cause):
        super().__init__(f"{stage} failed at t={t:.6g}: {cause}")
        self.stage = stage
        self.t = t


class Simulation:
    """State and stepping for one run, deterministic or stochastic."""

    def __init__(self, cfg: RunConfig, consts: PhysConsts = PhysConsts()):
        self.cfg = cfg
        self.consts = consts
        scen = scenarios.initialize(cfg.scenario_config(), consts)
        self.scenario = scen
        self.grid = scen.grid

        sol = cfg.solver
        self.flow_solver = NSSolver(
            scen.grid, scen.bc, scen.theta_profile, consts,
            mu_m=sol["mu_m"], mu_h=sol["mu_h"], gmres_tol=sol["gmres_tol"])
        self.cloud_solver = CloudSolver(
            scen.grid, scen.bc, mu_q=sol["mu_q"], consts=consts,
            bottom=scen.bottom)
        self.couple = sol["couple"]
        self.rk_rtol = sol["rk_rtol"]
        self.rk_atol = sol["rk_atol"]
        self.cfl = cfg.time["cfl"]

        M = cfg.stochastic["modes"]
        self.galerkin = None
        self.basis = None
        if M > 0 and cfg.stochastic["method"] == "galerkin":
            self.basis = gpc.basis_init(M)
            pm = scen.param_modes
            self.galerkin = gpc.GalerkinCloudSolver(
                self.cloud_solver, self.basis,
                k1_modes=pm.get("k1"), k2_modes=pm.get("k2"),
                alpha_modes=pm.get("alpha"))
            self.cloud = scen.cloud_modes(self.basis)
        else:
            self.cloud = scen.wq.copy()
        self.flow = scen.flow.copy()
        self.t = 0.0
        self.rain_out = 0.0

    # -- stepping ----------------------------------------------------------

    def _cloud_mean(self):
        return self.cloud[:, 0] if self.galerkin is not None else self.cloud

    def _source(self, rho, theta):
        if not self.couple:
            return None
        return self.cloud_solver.source_theta(self._cloud_mean(), rho, theta)

    def pick_dt(self, dt_cap=np.inf):
        """Step so the half step meets the flow CFL, capped by the cloud
        advective bound and the configured maximum."""
        rho, u, theta, _ = self.flow_solver.diagnose(self.flow)
        dt = min(2.0 * self.flow_solver.cfl_dt(self.flow, limit=self.cfl),
                 self.cfg.time["dt_max"], dt_cap)
        if self.galerkin is not None:
            adv, _ = self.galerkin.cfl_dt(self.cloud, rho, u, limit=self.cfl)
        else:
            adv, _ = self.cloud_solver.cfl_dt(self.cloud, rho, u,
                                              limit=self.cfl)
        return min(dt, adv)

    def strang_step(self, dt):
        fs = self.flow_solver
        rho, u, theta, _ = fs.diagnose(self.flow)
        try:
            self.flow = fs.imex_step(self.flow, 0.5 * dt,
                                     s_theta=self._source(rho, theta))
        except Exception as exc:
            raise SimulationError("flow solver (first half step)",
                                  self.t, exc) from exc

        rho, u, theta, _ = fs.diagnose(self.flow)
        if self.galerkin is not None:
            _, euler = self.galerkin.cfl_dt(self.cloud, rho, u, limit=self.cfl)
            rhs = lambda y: self.galerkin.rhs(y, rho, u, theta)
        else:
            _, euler = self.cloud_solver.cfl_dt(self.cloud, rho, u,
                                                limit=self.cfl)
            rhs = lambda y: self.cloud_solver.rhs(y, rho, u, theta)
        try:
            self.cloud, out = stabilized_rk_integrate(
                self.cloud, rhs, dt, min(euler, dt),
                rtol=self.rk_rtol, atol=self.rk_atol)
        except Exception as exc:
            raise SimulationError("cloud integrator", self.t, exc) from exc
        self.rain_out += out

        try:
            self.flow = fs.imex_step(self.flow, 0.5 * dt,
                                     s_theta=self._source(rho, theta))
        except Exception as exc:
            raise SimulationError("flow solver (second half step)",
                                  self.t, exc) from exc
        self.t += dt

    def advance_to(self, t_target, fixed_dt=None):
        """March to t_target, truncating the final step to land on it."""
        while self.t < t_target - 1e-12 * max(1.0, t_target):
            remaining = t_target - self.t
            dt = fixed_dt if fixed_dt is not None else self.pick_dt()
            self.strang_step(min(dt, remaining))

    # -- diagnostics -------------------------------------------------------

    def mixing_ratio_modes(self, comp):
        """Coefficients of q_comp (mode axis first; a 1-mode axis for
        deterministic runs)."""
        rho = self.flow_solver.background.rho_bar + self.flow.rho_p
        if self.galerkin is not None:
            return self.cloud[comp] / rho
        return (self.cloud[comp] / rho)[None]

    def diagnostics_row(self):
        """Domain-averaged mean and spread of the three mixing ratios."""
        basis = self.basis if self.basis is not None else gpc.basis_init(0)
        row = {"t": self.t}
        for comp, name in enumerate(CLOUD_NAMES):
            mean, sigma = gpc.domain_average_diagnostics(
                self.mixing_ratio_modes(comp), basis)
            row[f"mean[{name}]"] = mean
            row[f"sigma[{name}]"] = sigma
        row["rain_out"] = self.rain_out
        vel = self.flow_solver.diagnose(self.flow)[1]
        row["max_speed"] = max(float(np.max(np.abs(c))) for c in vel)
        return row

    def total_water(self):
        """Domain integral of all water species (mean state)."""
        return float(np.sum(self._cloud_mean())) * self.grid.cell_volume

    # -- run loop ----------------------------------------------------------

    def run(self, out_dir=None, fixed_dt=None, progress=None):
        """Advance to the configured end time, emitting snapshots and a
        diagnostics table at the configured cadences."""
        import pathlib

        t_end = self.cfg.time["t_end"]
        snap_dt = self.cfg.output["snapshot_interval"]
        diag_dt = self.cfg.output["diagnostics_interval"]
        rows = [self.diagnostics_row()]
        if out_dir is not None:
            out = pathlib.Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            self.write_snapshot(out / f"snap_{self.t:012.4f}.npz")

        next_diag = min(diag_dt, t_end)
        next_snap = min(snap_dt, t_end)
        wall0 = time.perf_counter()
        while self.t < t_end - 1e-12 * max(1.0, t_end):
            target = min(next_diag, next_snap, t_end)
            self.advance_to(target, fixed_dt=fixed_dt)
            if self.t >= next_diag - 1e-9 or self.t >= t_end - 1e-12:
                rows.append(self.diagnostics_row())
                next_diag += diag_dt
            if out_dir is not None and (self.t >= next_snap - 1e-9
                                        or self.t >= t_end - 1e-12):
                self.write_snapshot(out / f"snap_{self.t:012.4f}.npz")
                next_snap += snap_dt
            if progress is not None:
                progress(self.t, t_end)
        wall = time.perf_counter() - wall0
        if out_dir is not None:
            write_diagnostics(out / "diagnostics.csv", rows)
        return rows, wall

    # -- snapshots ---------------------------------------------------------

    def write_snapshot(self, path):
        write_snapshot(path, self)

    def load_snapshot(self, path):
        data = read_snapshot(path)
        if tuple(data["cells"]) != self.grid.cells:
            raise ValueError(
                f"snapshot cells {tuple(data['cells'])} do not match the "
                f"run's grid {self.grid.cells}")
        if data["cloud"].shape != self.cloud.shape:
            raise ValueError("snapshot cloud state shape mismatch "
                             "(different mode count?)")
        self.flow = FlowState(
            rho_p=data["rho_p"],
            rho_u=[data[f"rho_u{a}"] for a in range(self.grid.dim)],
            rho_theta_p=data["rho_theta_p"])
        self.cloud = data["cloud"]
        self.t = float(data["t"])
        self.rain_out = float(data["rain_out"])


def write_snapshot(path, sim: Simulation):
    header = {
        "version": SNAPSHOT_VERSION,
        "dim": sim.grid.dim,
        "cells": list(sim.grid.cells),
        "spacing": list(sim.grid.spacing),
        "t": sim.t,
        "modes": 0 if sim.basis is None else sim.basis.M,
        "variables": ["rho_p"]
        + [f"rho_u{a}" for a in range(sim.grid.dim)]
        + ["rho_theta_p", "cloud"],
    }
    arrays = {"rho_p": sim.flow.rho_p, "rho_theta_p": sim.flow.rho_theta_p,
              "cloud": sim.cloud,
              "t": np.array(sim.t), "rain_out": np.array(sim.rain_out),
              "cells": np.array(sim.grid.cells),
              "header": np.frombuffer(
                  json.dumps(header).encode(), dtype=np.uint8)}
    for a in range(sim.grid.dim):
        arrays[f"rho_u{a}"] = sim.flow.rho_u[a]
    np.savez(path, **arrays)


def read_snapshot(path):
    try:
        with np.load(path) as npz:
            data = {k: npz[k] for k in npz.files}
    except Exception as exc:
        raise ValueError(f"unreadable snapshot {path}: {exc}") from exc
    if "header" not in data:
        raise ValueError(f"{path} is not a snapshot file (missing header)")
    header = json.loads(bytes(data["header"]).decode())
    if header["version"] != SNAPSHOT_VERSION:
        raise ValueError(f"snapshot version {header['version']} is not "
                         f"supported (expected {SNAPSHOT_VERSION})")
    for name in header["variables"]:
        if name not in data:
            raise ValueError(f"snapshot is missing variable {name!r}")
    data["meta"] = header
    return data


def write_diagnostics(path, rows):
    """CSV time series with full binary64 precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        keys = list(rows[0].keys())
        writer.writerow(keys)
        for row in rows:
            writer.writerow(f"{row[k]:.17g}" for k in keys)


def flow_field_norms(sim: Simulation):
    """L1/L2/Linf of every flow perturbation variable."""
    zero = np.zeros(sim.grid.cells)
    vol = sim.grid.cell_volume
    out = {"rho_p": field_norms(sim.flow.rho_p, zero, vol),
           "rho_theta_p": field_norms(sim.flow.rho_theta_p, zero, vol)}
    for a in range(sim.grid.dim):
        out[f"rho_u{a}"] = field_norms(sim.flow.rho_u[a], zero, vol)
    return out
