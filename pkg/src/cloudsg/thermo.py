"""Moist-air thermodynamics: equation of state, temperature diagnosis,
saturation quantities, pressure linearization and the hydrostatic background.

All functions accept scalars or numpy arrays and broadcast element-wise.
Negative concentrations coming out of transport undershoots must be clipped
by the caller (``clip_concentrations``) before evaluation; the unclipped
values stay in the transported state to preserve discrete conservation.
"""

from dataclasses import dataclass

import numpy as np

from cloudsg.constants import PhysConsts

T_SAT_MIN = 150.0
T_SAT_MAX = 350.0


def clip_concentrations(*qs):
    """Clip concentrations to be nonnegative for thermodynamic evaluation."""
    out = tuple(np.maximum(q, 0.0) for q in qs)
    return out[0] if len(out) == 1 else out


def gas_constant_moist(q_v, q_c, q_r, consts: PhysConsts = PhysConsts()):
    """Gas constant of the moist mixture, R_m = (1-q_v-q_c-q_r) R + q_v R_v."""
    return (1.0 - q_v - q_c - q_r) * consts.R + q_v * consts.R_v


def gamma_moist(R_m, consts: PhysConsts = PhysConsts()):
    """Adiabatic exponent gamma_m = c_p / (c_p - R_m)."""
    return consts.c_p / (consts.c_p - R_m)


def eos_pressure(rho_theta, R_m=None, consts: PhysConsts = PhysConsts()):
    """Pressure from the moist equation of state, p = p0 (R rho theta / p0)^gamma_m."""
    rho_theta = np.asarray(rho_theta, dtype=float)
    if np.any(rho_theta <= 0.0):
        raise ValueError("rho*theta must be positive in the equation of state")
    if R_m is None:
        R_m = consts.R
    gm = gamma_moist(R_m, consts)
    p0 = consts.p0_eos
    return p0 * (consts.R * rho_theta / p0) ** gm


def temperature(theta, p, q_v=0.0, q_c=0.0, q_r=0.0, consts: PhysConsts = PhysConsts()):
    """Temperature from potential temperature: T = (R/R_m) theta (p/p0)^(R_m/c_p)."""
    R_m = gas_constant_moist(q_v, q_c, q_r, consts)
    return (consts.R / R_m) * theta * (p / consts.p0_eos) ** (R_m / consts.c_p)


def saturation_pressure(T):
    """Saturation water vapor pressure over a liquid surface [Pa].

    Closed-form fit valid for 150 K < T < 350 K; rejected outside that window.
    """
    T = np.asarray(T, dtype=float)
    if np.any(T <= T_SAT_MIN) or np.any(T >= T_SAT_MAX):
        raise ValueError("temperature outside the saturation formula validity window")
    logT = np.log(T)
    return np.exp(
        54.842763 - 6763.22 / T - 4.21 * logT + 0.000367 * T
        + np.tanh(0.0415 * (T - 218.8))
        * (53.878 - 1331.22 / T - 9.44523 * logT + 0.014025 * T)
    )


def saturation(T, p, consts: PhysConsts = PhysConsts()):
    """Saturation pressure and mixing ratio: q_* = eps p_s(T) / p."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0):
        raise ValueError("pressure must be positive")
    p_s = saturation_pressure(T)
    return p_s, consts.eps * p_s / p


def pressure_perturbation(rho_theta_pert, rho_theta_bar, consts: PhysConsts = PhysConsts()):
    """Linearized pressure perturbation about the background.

    p' = gamma p0 (R rho_theta_bar / p0)^gamma * rho_theta_pert / rho_theta_bar
    with the dry gamma (the background carries no moisture).
    """
    return pressure_coefficient(rho_theta_bar, consts) * rho_theta_pert


def pressure_coefficient(rho_theta_bar, consts: PhysConsts = PhysConsts()):
    """Coefficient dp/d(rho theta) evaluated at the background state."""
    rho_theta_bar = np.asarray(rho_theta_bar, dtype=float)
    if np.any(rho_theta_bar <= 0.0):
        raise ValueError("background rho*theta must be positive")
    gm = consts.gamma_dry
    p0 = consts.p0_eos
    return gm * p0 * (consts.R * rho_theta_bar / p0) ** gm / rho_theta_bar


@dataclass(frozen=True)
class BackgroundState:
    """Hydrostatically balanced dry background fields."""

    theta_bar: np.ndarray
    rho_bar: np.ndarray
    p_bar: np.ndarray
    rho_theta_bar: np.ndarray
    exner: np.ndarray


def hydrostatic_background(theta_bar, grid, consts: PhysConsts = PhysConsts()) -> BackgroundState:
    """Build the hydrostatic background for a potential-temperature profile.

    theta_bar is a scalar, a callable of height, or a full field. The Exner
    factor pi_e = 1 - g x3 / (c_p theta_bar) is evaluated with the local
    theta_bar, and rho_bar = p0/(R theta_bar) pi_e^(1/(gamma-1)) with the
    dry gamma.
    """
    coords = grid.coordinate_fields()
    x3 = coords[grid.vertical_axis]
    if callable(theta_bar):
        th = np.broadcast_to(theta_bar(x3), grid.cells).astype(float)
    else:
        th = np.broadcast_to(np.asarray(theta_bar, dtype=float), grid.cells).copy()
    if np.any(th <= 0.0):
        raise ValueError("background potential temperature must be positive")
    pi_e = 1.0 - consts.g * x3 / (consts.c_p * th)
    if np.any(pi_e <= 0.0):
        raise ValueError("domain too tall for the background profile (pi_e <= 0)")
    gamma = consts.gamma_dry
    rho_bar = consts.p0_eos / (consts.R * th) * pi_e ** (1.0 / (gamma - 1.0))
    rho_theta_bar = rho_bar * th
    p_bar = eos_pressure(rho_theta_bar, consts.R, consts)
    return BackgroundState(theta_bar=th, rho_bar=rho_bar, p_bar=p_bar,
                           rho_theta_bar=rho_theta_bar, exner=pi_e)
