"""Convergence and comparison studies: grid/time refinement (EOC), spectral
decay in the chaos degree, and Galerkin versus collocation."""

import csv
import time
import warnings

import numpy as np

from cloudsg import gpc, scenarios
from cloudsg.config import RunConfig
from cloudsg.simulation import Simulation


def restrict(field, dim, factor=2):
    """Conservative coarsening: block average over factor^dim cells.

    The last `dim` axes are spatial; leading axes (components, modes) pass
    through unchanged. Cell counts must be divisible by the factor.
    """
    field = np.asarray(field)
    lead = field.ndim - dim
    shape = list(field.shape[:lead])
    for n in field.shape[lead:]:
        if n % factor:
            raise ValueError(f"cannot coarsen {n} cells by factor {factor}")
        shape += [n // factor, factor]
    out = field.reshape(shape)
    for k in range(dim):
        out = out.mean(axis=lead + k + 1)
    return out


def l2_norm(diff, cell_volume):
    return float(np.sqrt(np.sum(np.asarray(diff) ** 2) * cell_volume))


def eoc_from_errors(errors):
    """EOC column: log2 of successive error ratios, NaN where degenerate."""
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        if a > 0.0 and b > 0.0:
            out.append(float(np.log2(a / b)))
        else:
            warnings.warn("identical solutions at consecutive levels; "
                          "EOC undefined", RuntimeWarning)
            out.append(float("nan"))
    return out


class StudyReport:
    """Tabular study output: one row per level, named columns."""

    def __init__(self, columns):
        self.columns = list(columns)
        self.rows = []
        self.notes = []

    def add_row(self, **values):
        self.rows.append({c: values.get(c) for c in self.columns})

    def column(self, name):
        return [r[name] for r in self.rows]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                out = []
                for c in self.columns:
                    v = row[c]
                    if isinstance(v, float):
                        out.append(f"{v:.17g}")
                    else:
                        out.append("" if v is None else str(v))
                writer.writerow(out)
            for note in self.notes:
                writer.writerow(["#", note])


def _solution_fields(sim: Simulation):
    """Named fields entering the refinement comparison."""
    out = {"rho_qv": sim.cloud[0], "rho_qc": sim.cloud[1],
           "rho_qr": sim.cloud[2], "rho_p": sim.flow.rho_p,
           "rho_theta_p": sim.flow.rho_theta_p}
    for a in range(sim.grid.dim):
        out[f"rho_u{a}"] = sim.flow.rho_u[a]
    return out


def eoc_study(base: RunConfig, levels, dt_coarsest=None,
              progress=None) -> StudyReport:
    """Refinement study on nested grids with jointly refined time step.

    levels are per-axis cell counts N (grids N x N x ...); each level runs
    with dt = dt_coarsest * levels[0] / N (default 20/N). Errors are L2
    norms of the difference to the next-finer solution restricted to the
    coarser grid; the convergence rate is the log2 ratio of successive
    errors.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("need at least 3 levels for a convergence rate")
    for a, b in zip(levels[:-1], levels[1:]):
        if b != 2 * a:
            raise ValueError(f"levels must double ({a} -> {b} does not nest)")
    if dt_coarsest is None:
        dt_coarsest = 20.0 / levels[0]

    runs = []
    for N in levels:
        cfg = base.replace("scenario", cells=(N,) * base.scenario["dim"])
        sim = Simulation(cfg)
        dt = dt_coarsest * levels[0] / N
        t0 = time.perf_counter()
        sim.advance_to(cfg.time["t_end"], fixed_dt=dt)
        wall = time.perf_counter() - t0
        runs.append((N, sim, wall))
        if progress is not None:
            progress(N, wall)

    names = list(_solution_fields(runs[0][1]).keys())
    errors = {n: [] for n in names}
    dim = base.scenario["dim"]
    for (N, coarse, _), (_, fine, _) in zip(runs[:-1], runs[1:]):
        vol = coarse.grid.cell_volume
        ff = _solution_fields(fine)
        for n, cf in _solution_fields(coarse).items():
            errors[n].append(l2_norm(cf - restrict(ff[n], dim), vol))

    report = StudyReport(
        ["N", "dt", "wall"]
        + [c for n in names for c in (f"err[{n}]", f"eoc[{n}]")])
    eocs = {n: eoc_from_errors(errors[n]) for n in names}
    for i, (N, _, wall) in enumerate(runs[:-1]):
        row = {"N": N, "dt": dt_coarsest * levels[0] / N, "wall": wall}
        for n in names:
            row[f"err[{n}]"] = errors[n][i]
            row[f"eoc[{n}]"] = eocs[n][i - 1] if i >= 1 else None
        report.add_row(**row)
    return report


def spectral_study(base: RunConfig, M_list, M_ref, progress=None) -> StudyReport:
    """Truncation error of the chaos expansion against a high-degree run.

    All runs share the grid and scenario; the error at degree M is the L2
    norm (over cells, modes and cloud components) of the difference between
    the degree-M coefficients and the first M+1 coefficients of the
    reference run.
    """
    if M_ref <= max(M_list):
        raise ValueError("reference degree must exceed every tested degree")

    def run_at(M):
        cfg = base.replace("stochastic", modes=M, method="galerkin")
        sim = Simulation(cfg)
        t0 = time.perf_counter()
        sim.advance_to(cfg.time["t_end"])
        return sim, time.perf_counter() - t0

    ref, _ = run_at(M_ref)
    report = StudyReport(["M", "error", "wall"])
    errors = []
    for M in M_list:
        sim, wall = run_at(M)
        diff = sim.cloud - ref.cloud[:, :M + 1]
        err = l2_norm(diff, sim.grid.cell_volume)
        errors.append(err)
        report.add_row(M=M, error=err, wall=wall)
        if progress is not None:
            progress(M, wall)
    pos = [(m, e) for m, e in zip(M_list, errors) if e > 0.0]
    if len(pos) >= 2:
        slope = float(np.polyfit([m for m, _ in pos],
                                 np.log([e for _, e in pos]), 1)[0])
        report.notes.append(f"log-linear fit slope per mode: {slope:.4f}")
        report.slope = slope
    else:
        report.slope = float("nan")
    return report


def collocation_study_run(base: RunConfig, basis: gpc.GpcBasis):
    """Per-node deterministic runs combined into chaos coefficients.

    Each node receives the nodal realization of the uncertain initial data
    and parameters; the final cloud states are transformed. Returns the
    coefficient state (3, M+1, *cells)."""
    scen = scenarios.initialize(base.scenario_config())

    def run_node(node, omega):
        cfg = base.replace("stochastic", modes=0)
        sim = Simulation(cfg)
        sim.cloud = scen.cloud_at_node(omega)
        overrides = scen.params_at_node(omega)
        if overrides:
            # rebuild the deterministic solver with nodal parameters
            from dataclasses import replace as dc_replace
            sim.cloud_solver.params = dc_replace(sim.cloud_solver.params,
                                                 **overrides)
        sim.advance_to(cfg.time["t_end"])
        return sim.cloud

    return gpc.collocation_run(run_node, basis)


def compare_collocation(base: RunConfig, M_list, progress=None) -> StudyReport:
    """Galerkin vs collocation: per-mode coefficient norms and wall time.

    The methods are not identical: the Galerkin flow couples through the
    expected cloud state, while each collocation node runs its own coupled
    flow. Agreement is measured on the leading coefficient norms.
    """
    report = StudyReport(["M", "mode", "galerkin_norm", "collocation_norm",
                          "rel_diff", "wall_galerkin", "wall_collocation"])
    for M in M_list:
        basis = gpc.basis_init(M)
        cfg = base.replace("stochastic", modes=M, method="galerkin")
        sim = Simulation(cfg)
        t0 = time.perf_counter()
        sim.advance_to(cfg.time["t_end"])
        wall_g = time.perf_counter() - t0

        t0 = time.perf_counter()
        chat_c = collocation_study_run(base, basis)
        wall_c = time.perf_counter() - t0

        vol = sim.grid.cell_volume
        for k in range(M + 1):
            gn = l2_norm(sim.cloud[:, k], vol)
            cn = l2_norm(chat_c[:, k], vol)
            rel = abs(gn - cn) / max(gn, cn) if max(gn, cn) > 0 else 0.0
            report.add_row(M=M, mode=k, galerkin_norm=gn,
                           collocation_norm=cn, rel_diff=rel,
                           wall_galerkin=wall_g, wall_collocation=wall_c)
        if progress is not None:
            progress(M, wall_g + wall_c)
    return report
