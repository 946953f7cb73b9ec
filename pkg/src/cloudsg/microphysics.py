"""Warm-cloud process rates: activation, condensation/evaporation,
autoconversion, accretion and the rain fall speed, plus the material
coefficient laws they depend on.

The hot path (``reaction_rates``) assembles the rates in the algebraically
folded form, with every folded coefficient computed at runtime from the
parameter set. ``reaction_rates_unfolded`` is an independent assembly from
the single-particle relations and exists purely for cross-validation.

Fractional powers go through ``safe_pow``, which cuts off arguments below
a threshold so that negative exponents never see a near-zero base.
"""

from dataclasses import dataclass

import numpy as np

from cloudsg.constants import MicroParams, PhysConsts
from cloudsg import thermo

_COTH_SMALL = 1e-8
CUTOFF = 1e-16


def safe_pow(zeta, xi):
    """zeta**xi for zeta above the cutoff threshold (1e-16), 0 below it.

    The caller must hand in nonnegative arguments (clip first).
    """
    zeta = np.asarray(zeta, dtype=float)
    if np.any(zeta < 0.0):
        raise ValueError("safe_pow requires a nonnegative base; clip first")
    mask = zeta > CUTOFF
    # keep the masked-out lanes away from 0**negative
    base = np.where(mask, zeta, 1.0)
    out = np.where(mask, base ** xi, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def material_coeffs(T, p, rho, params: MicroParams = MicroParams(),
                    consts: PhysConsts = PhysConsts()):
    """Vapor diffusivity, heat conduction, air viscosity and the latent-heat
    growth correction (D_v, K_T, mu_air, G)."""
    T = np.asarray(T, dtype=float)
    D_v = params.D_v0 * (T / consts.T_melt) ** 1.94 * (consts.p_ref_micro / p)
    K_T = params.a_K * T ** 1.5 / (T + params.b_K * 10.0 ** (params.c_K / T))
    mu_air = params.mu_0 * T ** 1.5 / (T + params.T_mu)
    p_s = thermo.saturation_pressure(T)
    L, R_v = consts.L, consts.R_v
    G = 1.0 / ((L / (R_v * T) - 1.0) * L * p_s / (R_v * T * T) * (D_v / K_T) + 1.0)
    return D_v, K_T, mu_air, G


def rain_number_coefficient(rho, params: MicroParams = MicroParams()):
    """Density-dependent rain closure coefficient c_r = c_r0 rho^(-3/4)."""
    return params.c_r0 * np.asarray(rho, dtype=float) ** -0.75


def number_concentrations(q_c, q_r, rho, params: MicroParams = MicroParams()):
    """Diagnosed number concentrations (n_c, n_r) per kg of air."""
    q_c = np.asarray(q_c, dtype=float)
    denom = q_c + params.N_inf * params.m0
    x = q_c / (params.N0 * params.m0)
    small = x < _COTH_SMALL
    # q_c * coth(x) stays finite as q_c -> 0: it tends to N0*m0
    q_coth = np.where(
        small,
        params.N0 * params.m0 + q_c * x / 3.0,
        q_c / np.tanh(np.where(small, 1.0, x)),
    )
    n_c = params.N_inf / denom * q_coth
    n_r = rain_number_coefficient(rho, params) * safe_pow(q_r, params.gamma_r)
    return n_c, n_r


def fall_speed(q_r, rho, params: MicroParams = MicroParams(),
               consts: PhysConsts = PhysConsts(), alpha=None):
    """Mass-weighted rain fall speed v_q(q_r, rho) [m/s], zero below cutoff."""
    if alpha is None:
        alpha = params.alpha
    q_r = np.asarray(q_r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    mask = q_r > params.cutoff
    q = np.where(mask, q_r, 1.0)
    c_r = rain_number_coefficient(rho, params)
    denom = q + params.m_tau * c_r * q ** params.gamma_r
    v = (alpha * q ** params.beta * (params.m_tau / denom) ** params.beta
         * np.sqrt(consts.rho_ref / rho))
    out = np.where(mask, v, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def fall_speed_flux_bound(q_r, rho, params: MicroParams = MicroParams(),
                          consts: PhysConsts = PhysConsts(), alpha=None):
    """Bound on |d(v_q * rho q_r)/d(rho q_r)|.

    The derivative equals v_q (1 + beta * s) with s in (0, 1), so
    (1 + beta) v_q is a rigorous bound.
    """
    v = fall_speed(q_r, rho, params, consts, alpha=alpha)
    return (1.0 + params.beta) * v


def ventilation_coefficient_bE(T, p, rho, params: MicroParams = MicroParams(),
                               consts: PhysConsts = PhysConsts()):
    """Evaporation ventilation coefficient b_E from its defining relation."""
    D_v, _, mu, _ = material_coeffs(T, p, rho, params, consts)
    geom = (3.0 / (4.0 * np.pi * consts.rho_liq)) ** (1.0 / 6.0)
    return params.b_v * (mu / (rho * D_v)) ** (1.0 / 3.0) * np.sqrt(2.0 * rho / mu) * geom


@dataclass(frozen=True)
class RateBundle:
    """Process rates [1/s] and the assembled right-hand sides [kg/(m^3 s)].

    R3 is assembled as -(R1 + R2) so the three source terms cancel exactly.
    """

    C_act: np.ndarray
    C1: np.ndarray
    C: np.ndarray
    E: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    R3: np.ndarray


def reaction_rates(q_v, q_c, q_r, rho, T, p, params: MicroParams = MicroParams(),
                   consts: PhysConsts = PhysConsts(), k1=None, k2=None, alpha=None) -> RateBundle:
    """All process rates at one thermodynamic state (element-wise).

    Concentrations must already be clipped to be nonnegative. k1, k2 and
    alpha may be overridden per call (nodal values in stochastic runs).
    """
    if k1 is None:
        k1 = params.k1
    if k2 is None:
        k2 = params.k2
    if alpha is None:
        alpha = params.alpha
    q_v = np.asarray(q_v, dtype=float)
    q_c = np.asarray(q_c, dtype=float)
    q_r = np.asarray(q_r, dtype=float)
    rho = np.asarray(rho, dtype=float)

    D_v, _, _, G = material_coeffs(T, p, rho, params, consts)
    _, q_star = thermo.saturation(T, p, consts)
    dq = q_v - q_star

    geom3 = (3.0 / (4.0 * np.pi * consts.rho_liq)) ** (1.0 / 3.0)
    d_coef = 4.0 * np.pi * D_v * G * geom3

    n_c, _ = number_concentrations(q_c, q_r, rho, params)
    c_r = rain_number_coefficient(rho, params)
    v_tau = fall_speed(q_r, rho, params, consts, alpha=alpha)
    g = params.gamma_r

    C_act = params.N0 * d_coef * rho * np.maximum(dq, 0.0) * params.m0 ** (1.0 / 3.0)
    C1 = d_coef * rho * dq * safe_pow(n_c, 2.0 / 3.0) * safe_pow(q_c, 1.0 / 3.0)
    b_E = ventilation_coefficient_bE(T, p, rho, params, consts)
    E = d_coef * rho * np.maximum(-dq, 0.0) * (
        params.a_E * c_r ** (2.0 / 3.0) * safe_pow(q_r, 1.0 / 3.0 + 2.0 * g / 3.0)
        + b_E * np.sqrt(c_r * v_tau) * safe_pow(q_r, 0.5 + 0.5 * g)
    )
    A1 = k1 * rho * q_c * q_c / consts.rho_liq
    geom23 = geom3 * geom3
    A2 = (k2 * rho * np.pi * c_r ** (1.0 / 3.0) * geom23
          * q_c * v_tau * safe_pow(q_r, (2.0 + g) / 3.0))

    C = C1 + C_act
    R1 = rho * (-C + E)
    R2 = rho * (C - A1 - A2)
    R3 = -(R1 + R2)
    return RateBundle(C_act=C_act, C1=C1, C=C, E=E, A1=A1, A2=A2,
                      R1=R1, R2=R2, R3=R3)


def reaction_rates_unfolded(q_v, q_c, q_r, rho, T, p,
                            params: MicroParams = MicroParams(),
                            consts: PhysConsts = PhysConsts()):
    """Reference assembly of (C_act, C1, E, A1, A2) from the single-particle
    relations, multiplying single-drop rates by the number closures."""
    D_v, _, _, G = material_coeffs(T, p, rho, params, consts)
    _, q_star = thermo.saturation(T, p, consts)
    dq = q_v - q_star
    geom3 = (3.0 / (4.0 * np.pi * consts.rho_liq)) ** (1.0 / 3.0)
    d_coef = 4.0 * np.pi * D_v * G * geom3

    n_c, n_r = number_concentrations(q_c, q_r, rho, params)
    c_r = rain_number_coefficient(rho, params)
    v_tau = fall_speed(q_r, rho, params, consts)
    g = params.gamma_r

    C_act = params.N0 * d_coef * rho * np.maximum(dq, 0.0) * params.m0 ** (1.0 / 3.0)
    # mean cloud droplet mass m_c = q_c / n_c
    m_c = np.where(n_c > 0, q_c / np.where(n_c > 0, n_c, 1.0), 0.0)
    C1 = n_c * d_coef * rho * dq * safe_pow(m_c, 1.0 / 3.0)
    # mean rain drop mass m_r = q_r / n_r
    m_r = np.where(n_r > 0, q_r / np.where(n_r > 0, n_r, 1.0), 0.0)
    b_E = ventilation_coefficient_bE(T, p, rho, params, consts)
    E = n_r * d_coef * rho * np.maximum(-dq, 0.0) * (
        params.a_E * safe_pow(m_r, 1.0 / 3.0)
        + b_E * np.sqrt(v_tau) * safe_pow(m_r, 0.5)
    )
    A1 = params.k1 * rho * q_c * q_c / consts.rho_liq
    geom23 = geom3 * geom3
    A2 = (params.k2 * rho * np.pi * c_r ** (1.0 / 3.0) * geom23
          * q_c * v_tau * safe_pow(q_r, (2.0 + g) / 3.0))
    return C_act, C1, E, A1, A2


def latent_heat_source(rho, theta, T, C, E, consts: PhysConsts = PhysConsts()):
    """Latent heating of the potential temperature equation,
    S_theta = rho L theta / (c_p T) (C - E)."""
    return rho * consts.L * theta / (consts.c_p * T) * (C - E)
