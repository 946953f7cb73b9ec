"""Moisture transport and microphysics: semi-discrete advection (with rain
sedimentation), diffusion and reactions for the three water densities
(rho q_v, rho q_c, rho q_r), plus an adaptive embedded third-order explicit
integrator for the resulting stiff ODE system.

The integrator presents a tolerance + forward-Euler-bound interface: callers
hand in the Euler stability bound of the right-hand side; internal substeps
are error-controlled and capped by that bound so arbitrarily long coupling
intervals remain stable.
"""

from dataclasses import dataclass

import numpy as np

from cloudsg import fv, microphysics, thermo
from cloudsg.constants import MicroParams, PhysConsts
from cloudsg.grid import BoundarySpec, Grid, apply_boundary

RHO_FLOOR = 1e-8


def inverse_density(rho, floor=RHO_FLOOR):
    """Smooth desingularized 1/rho: exact above the floor, bounded below it.

    2 rho / (rho^2 + max(rho, floor)^2) equals 1/rho whenever rho >= floor.
    """
    rho = np.asarray(rho, dtype=float)
    return 2.0 * rho / (rho * rho + np.maximum(rho, floor) ** 2)


class StiffnessError(RuntimeError):
    pass


@dataclass
class CloudTendency:
    """RHS evaluation output: tendency of the three water densities and the
    instantaneous rain mass flux rate through the bottom face [kg/s]."""

    tend: np.ndarray
    bottom_flux_rate: float


class CloudSolver:
    """Spatial operators for the cloud system on one grid.

    States are arrays shaped (3, *cells) holding (rho q_v, rho q_c, rho q_r).
    Leading axes beyond the component axis (chaos modes) broadcast through
    the transport kernels; reactions are evaluated by the caller per node in
    that case.
    """

    def __init__(self, grid: Grid, bc: BoundarySpec, mu_q=1.0e-2,
                 params: MicroParams = MicroParams(),
                 consts: PhysConsts = PhysConsts(),
                 bottom="open", sedimentation=True):
        if bottom not in ("open", "closed"):
            raise ValueError(f"bottom policy must be open or closed, got {bottom!r}")
        self.grid = grid
        self.bc = bc
        self.mu_q = float(mu_q)
        self.params = params
        self.consts = consts
        self.bottom = bottom
        self.sedimentation = bool(sedimentation)
        self._scalar_rules = bc.rules("scalar")

    # -- thermodynamic closure --------------------------------------------

    def thermo_state(self, wq, rho, theta):
        """Clipped mixing ratios, pressure and temperature for the state.

        The temperature handed to the closures is clamped into the validity
        window of the saturation-pressure fit, so that transient over- or
        undershoots of a split coupling step keep the rates finite and
        sign-correct instead of aborting the run.
        """
        q = thermo.clip_concentrations(*(wq[i] / rho for i in range(3)))
        R_m = thermo.gas_constant_moist(*q, self.consts)
        p = thermo.eos_pressure(rho * theta, R_m, self.consts)
        T = thermo.temperature(theta, p, *q, consts=self.consts)
        T = np.clip(T, thermo.T_SAT_MIN + 1.0, thermo.T_SAT_MAX - 1.0)
        return q, p, T

    def reaction_rates(self, wq, rho, theta, k1=None, k2=None, alpha=None):
        q, p, T = self.thermo_state(wq, rho, theta)
        return microphysics.reaction_rates(
            q[0], q[1], q[2], rho, T, p, self.params, self.consts,
            k1=k1, k2=k2, alpha=alpha)

    def source_theta(self, wq, rho, theta, k1=None, k2=None, alpha=None):
        """Latent heating S_theta for the flow equations."""
        q, p, T = self.thermo_state(wq, rho, theta)
        rb = microphysics.reaction_rates(
            q[0], q[1], q[2], rho, T, p, self.params, self.consts,
            k1=k1, k2=k2, alpha=alpha)
        return microphysics.latent_heat_source(rho, theta, T, rb.C, rb.E,
                                               self.consts)

    # -- spatial operators -------------------------------------------------

    def transport(self, wq, rho, u, alpha=None):
        """Advection (incl. sedimentation of rain) and diffusion tendencies.

        Returns (tendency, bottom_flux_rate). The bottom rate is the total
        rain mass per second leaving through an open bottom (nonnegative).
        """
        g = self.grid
        d = g.dim
        vert = g.vertical_axis
        tend = np.zeros_like(wq)

        rho_pad = apply_boundary(np.asarray(rho, dtype=float), self._scalar_rules)
        wq_pad = apply_boundary(wq, self._scalar_rules, lead=1)
        bottom_rate = 0.0

        for a in range(d):
            h = g.spacing[a]
            u_pad = apply_boundary(u[a], self.bc.rules(f"momentum{a}"))
            u_face = fv.face_average(fv.along(u_pad, a), a)
            lam = np.abs(u_face)
            rho_face = fv.face_average(fv.along(rho_pad, a), a)

            for comp in range(3):
                wl, wr = fv.reconstruct(fv.along(wq_pad[comp], a), a)
                fl = wl * u_face
                fr = wr * u_face
                lam_c = lam
                if comp == 2 and a == vert and self.sedimentation:
                    q_l = np.maximum(wl, 0.0) / rho_face
                    q_r = np.maximum(wr, 0.0) / rho_face
                    v_l = microphysics.fall_speed(q_l, rho_face, self.params,
                                                  self.consts, alpha=alpha)
                    v_r = microphysics.fall_speed(q_r, rho_face, self.params,
                                                  self.consts, alpha=alpha)
                    fl = fl - v_l * wl
                    fr = fr - v_r * wr
                    lam_c = lam + (1.0 + self.params.beta) * np.maximum(v_l, v_r)
                flux = fv.rusanov_flux(fl, fr, wl, wr, lam_c)
                if comp == 2 and a == vert and self.sedimentation \
                        and self.bc.kinds[a] == "wall":
                    flux = self._fix_vertical_wall_flux(flux, a)
                    bottom_rate = -float(
                        np.sum(np.take(flux, 0, axis=a))) * g.cell_volume / h
                tend[comp] -= fv.face_divergence(flux, a, h)

        # diffusion of the mixing ratios with coefficient mu_q rho
        coeff_pad = self.mu_q * rho_pad
        inv_rho_pad = inverse_density(rho_pad)
        for comp in range(3):
            q_pad = wq_pad[comp] * inv_rho_pad
            for a in range(d):
                tend[comp] += fv.diffusion_term(
                    fv.along(q_pad, a), fv.along(coeff_pad, a), a, g.spacing[a])

        return tend, bottom_rate

    def _fix_vertical_wall_flux(self, flux, axis):
        """Sedimentation flux through the vertical walls.

        Top: nothing falls in, the flux is zeroed. Bottom: rain leaves with
        the upwind (interior) flux when the bottom is open, or is blocked
        when it is closed. The mirrored-ghost Rusanov value at the bottom
        face is already the interior upwind flux up to its (zero) dissipation,
        so only the closed case needs intervention.
        """
        idx_top = [slice(None)] * flux.ndim
        idx_top[axis] = -1
        flux[tuple(idx_top)] = 0.0
        if self.bottom == "closed":
            idx_bot = [slice(None)] * flux.ndim
            idx_bot[axis] = 0
            flux[tuple(idx_bot)] = 0.0
        return flux

    def rhs(self, wq, rho, u, theta, k1=None, k2=None, alpha=None) -> CloudTendency:
        """Full semi-discrete right-hand side at frozen flow fields."""
        tend, bottom = self.transport(wq, rho, u, alpha=alpha)
        rates = self.reaction_rates(wq, rho, theta, k1=k1, k2=k2, alpha=alpha)
        tend[0] += rates.R1
        tend[1] += rates.R2
        tend[2] += rates.R3
        return CloudTendency(tend, bottom)

    # -- step bounds -------------------------------------------------------

    def cfl_dt(self, wq, rho, u, limit=0.5, dt_max=np.inf, safety=0.9):
        """Advective and diffusive explicit step bounds.

        Returns (dt_cloud, euler_bound): the advective CFL step and the
        forward-Euler bound including diffusion, both with the safety factor.
        """
        g = self.grid
        vert = g.vertical_axis
        q_r = np.maximum(wq[2], 0.0) / np.maximum(rho, RHO_FLOOR)
        v_q = microphysics.fall_speed(q_r, rho, self.params, self.consts)
        speed = 0.0
        for a in range(g.dim):
            s = np.abs(u[a])
            if a == vert:
                s = s + v_q
            speed = max(speed, float(np.max(s)))
        adv = dt_max if speed <= 0.0 else min(
            dt_max, safety * limit * g.h_min / speed)
        if self.mu_q > 0.0:
            ratio = float(np.max(rho) / max(np.min(rho), RHO_FLOOR))
            diff = safety * g.h_min ** 2 / (2.0 * g.dim * self.mu_q * ratio)
        else:
            diff = dt_max
        return adv, min(adv, diff, dt_max)


def stabilized_rk_integrate(y, rhs, dt_total, euler_bound, rtol=1e-6,
                            atol=1e-10, max_steps=100000):
    """Integrate y' = rhs(y) over dt_total with adaptive embedded 3(2) steps.

    Substeps are error-controlled and additionally capped by the supplied
    forward-Euler stability bound, so dt_total may exceed that bound by any
    factor. rhs returns (tendency, scalar_rate); the accumulated integral of
    the scalar rate (the bottom rain flux) is returned alongside the state.

    Raises StiffnessError if the step size underflows (below
    1e-12 * dt_total).
    """
    if dt_total <= 0.0:
        raise ValueError("dt_total must be positive")
    if euler_bound <= 0.0:
        raise ValueError("euler_bound must be positive")
    t = 0.0
    acc = 0.0
    dt = min(dt_total, euler_bound)
    k1, r1 = _eval(rhs, y)
    for _ in range(max_steps):
        dt = min(dt, dt_total - t)
        if dt < 1e-12 * dt_total:
            raise StiffnessError(
                f"step size underflow at t={t:.6g} of {dt_total:.6g}")
        k2, _ = _eval(rhs, y + 0.5 * dt * k1)
        k3, _ = _eval(rhs, y + 0.75 * dt * k2)
        y3 = y + dt * (2.0 / 9.0 * k1 + 1.0 / 3.0 * k2 + 4.0 / 9.0 * k3)
        k4, r4 = _eval(rhs, y3)
        err = dt * (-5.0 / 72.0 * k1 + 1.0 / 12.0 * k2 + 1.0 / 9.0 * k3
                    - 1.0 / 8.0 * k4)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y3))
        enorm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if enorm <= 1.0:
            # accept; trapezoidal accumulation of the boundary rate
            acc += 0.5 * dt * (r1 + r4)
            y = y3
            k1, r1 = k4, r4
            t += dt
            if t >= dt_total * (1.0 - 1e-14):
                return y, acc
        factor = 0.9 * (1.0 / max(enorm, 1e-12)) ** (1.0 / 3.0)
        dt = dt * min(5.0, max(0.2, factor))
        dt = min(dt, euler_bound)
    raise StiffnessError("integrator exceeded the internal step limit")


def _eval(rhs, y):
    out = rhs(y)
    if isinstance(out, CloudTendency):
        return out.tend, out.bottom_flux_rate
    if isinstance(out, tuple):
        return out
    return out, 0.0
