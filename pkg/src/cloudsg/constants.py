"""Physical constants and microphysical model parameters.

All quantities are SI. Two reference pressures coexist on purpose: the
equation of state uses p0_eos = 1e5 Pa while the material laws of the
microphysics (vapor diffusivity) are normalized at p_ref_micro = 101325 Pa.
Merging them would silently shift the diffusivity by about 1.3%.
"""

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class PhysConsts:
    """Physical constants and reference quantities."""

    R: float = 287.05          # gas constant, dry air [J/(kg K)]
    R_v: float = 461.51        # gas constant, water vapor [J/(kg K)]
    c_p: float = 1005.0        # heat capacity of dry air at const p [J/(kg K)]
    g: float = 9.81            # gravitational acceleration [m/s^2]
    L: float = 2.53e6          # latent heat of vaporization [J/kg]
    p0_eos: float = 1.0e5      # reference pressure in the equation of state [Pa]
    p_ref_micro: float = 101325.0  # reference pressure for material laws [Pa]
    T_ref: float = 288.0       # reference temperature [K]
    T_melt: float = 273.15     # melting temperature [K]
    rho_ref: float = 1.255     # reference air density [kg/m^3]
    rho_liq: float = 1000.0    # density of liquid water [kg/m^3]
    eps: float = 0.622         # molar mass ratio water/dry air

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v <= 0.0:
                raise ValueError(f"constant {f.name} must be positive, got {v}")
        # eps and R/R_v describe the same ratio; keep them consistent.
        if abs(self.eps - self.R / self.R_v) > 1e-3 * self.eps:
            raise ValueError("eps inconsistent with R/R_v")

    @property
    def gamma_dry(self) -> float:
        """Dry adiabatic exponent c_p/(c_p - R)."""
        return self.c_p / (self.c_p - self.R)


@dataclass(frozen=True)
class MicroParams:
    """Parameters of the warm-rain bulk microphysics.

    ``alpha``, ``k1`` and ``k2`` are the parameters that may additionally
    carry chaos expansions in stochastic runs (see ``scenarios``).
    """

    alpha: float = 190.3       # terminal velocity prefactor [m/s kg^-beta]
    beta: float = 4.0 / 15.0   # terminal velocity mass exponent
    k1: float = 0.0041         # autoconversion coefficient [kg/s]
    k2: float = 0.8            # accretion efficiency [kg]
    m_tau: float = 1.21e-5     # terminal velocity mass scale [kg]
    N0: float = 1.0e3          # activated droplet number at saturation [1/kg]
    N_inf: float = 8.0e8       # maximum condensation nuclei number [1/kg]
    m0: float = 5.236e-16      # activation mass of cloud droplets [kg]
    a_E: float = 0.78          # evaporation ventilation constant
    a_v: float = 0.78          # ventilation constant
    b_v: float = 0.308         # ventilation constant
    c_r0: float = 23752.6753   # rain number closure coefficient [kg^-1/4 m^3/4]
    gamma_r: float = 0.25      # rain number closure exponent
    cutoff: float = 1.0e-16    # fractional-power cutoff threshold
    D_v0: float = 2.11e-5      # vapor diffusivity at reference state [m^2/s]
    a_K: float = 0.002646      # heat conduction law coefficient [W/(m K^5/2)]
    b_K: float = 245.4         # heat conduction law coefficient [K]
    c_K: float = -12.0         # heat conduction law coefficient [K]
    mu_0: float = 1.458e-6     # viscosity law coefficient [s Pa K^-1/2]
    T_mu: float = 110.4        # viscosity law coefficient [K]

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name != "c_K" and v <= 0.0:
                raise ValueError(f"parameter {f.name} must be positive, got {v}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.gamma_r <= 1.0:
            raise ValueError("gamma_r must lie in (0, 1]")

    def override(self, **kwargs) -> "MicroParams":
        """Return a copy with the given named parameters replaced."""
        return replace(self, **kwargs)


def micro_params_from_mapping(mapping: dict) -> MicroParams:
    """Build MicroParams from a key/value mapping (config override path)."""
    known = {f.name for f in fields(MicroParams)}
    unknown = set(mapping) - known
    if unknown:
        raise KeyError(f"unknown microphysics parameters: {sorted(unknown)}")
    return MicroParams(**{k: float(v) for k, v in mapping.items()})


def phys_consts_from_mapping(mapping: dict) -> PhysConsts:
    """Build PhysConsts from a key/value mapping (config override path)."""
    known = {f.name for f in fields(PhysConsts)}
    unknown = set(mapping) - known
    if unknown:
        raise KeyError(f"unknown physical constants: {sorted(unknown)}")
    return PhysConsts(**{k: float(v) for k, v in mapping.items()})
