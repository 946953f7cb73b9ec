"""Initial and boundary data for the benchmark experiments.

Two scenarios: a rising warm bubble in a neutrally stratified dry background
and a moist Rayleigh-Benard cell between heated plates. Both come in
deterministic and stochastic variants; uncertainty enters either through the
initial vapor field (mode 1 proportional to mode 0) or through the
microphysical process parameters.
"""

from dataclasses import dataclass, field

import numpy as np

from cloudsg import gpc
from cloudsg.constants import MicroParams, PhysConsts
from cloudsg.flow import FlowState
from cloudsg.grid import BoundarySpec, Grid, GridSpec, build_grid
from cloudsg.thermo import hydrostatic_background

WARM_BUBBLE_EXTENT = (7000.0, 5000.0)
WARM_BUBBLE_RADIUS = 2000.0
RB_EXTENT = (5000.0, 1000.0)
RB_ETA_AMPLITUDE = 0.0021

PERTURB_TARGETS = ("none", "initial", "k1", "k2", "alpha")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "warm_bubble"
    dim: int = 2
    cells: tuple = (40, 40)
    nu: float = 0.0
    seed: int = 0
    t_end: float = 10.0
    output_interval: float = 1.0
    perturb: str = "none"
    literal_bubble: bool = False  # unnormalized radius in the cosine argument
    bottom: str = "open"

    def __post_init__(self):
        if self.scenario not in ("warm_bubble", "rayleigh_benard"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if not 0.0 <= self.nu < 1.0:
            raise ValueError("perturbation amplitude nu must lie in [0, 1)")
        if self.perturb not in PERTURB_TARGETS:
            raise ValueError(f"unknown perturbation target {self.perturb!r}")
        if len(self.cells) != self.dim:
            raise ValueError("cells must have one entry per axis")


@dataclass
class ScenarioState:
    """Everything the time loop needs to start a run."""

    grid: Grid
    bc: BoundarySpec
    theta_profile: object  # scalar or callable of height
    flow: FlowState
    wq: np.ndarray  # (3, *cells), deterministic part of the cloud state
    qv_mode1_ratio: float = 0.0  # stochastic initial data: mode1/mode0 of rho q_v
    param_modes: dict = field(default_factory=dict)
    bottom: str = "open"

    def cloud_modes(self, basis: gpc.GpcBasis):
        """Cloud coefficient state (3, M+1, *cells) for the given basis."""
        chat = np.zeros((3, basis.M + 1) + self.wq.shape[1:])
        chat[:, 0] = self.wq
        if self.qv_mode1_ratio != 0.0 and basis.M >= 1:
            chat[0, 1] = self.qv_mode1_ratio * chat[0, 0]
        return chat

    def cloud_at_node(self, omega):
        """Deterministic cloud state realized at a stochastic coordinate."""
        wq = self.wq.copy()
        wq[0] *= 1.0 + self.qv_mode1_ratio * omega
        return wq

    def params_at_node(self, omega):
        """Microphysics parameter overrides realized at omega."""
        return {name: float(np.polynomial.legendre.legval(omega, modes))
                for name, modes in self.param_modes.items()}


def eta_field(seed, cells, amplitude=RB_ETA_AMPLITUDE):
    """Uniform random field in [-amplitude, amplitude], keyed per cell.

    Each cell draws from its own Philox stream keyed by (seed, flat index),
    so the value in a cell depends only on the seed and the cell's position,
    not on traversal order or parallel decomposition.
    """
    n = int(np.prod(cells))
    vals = np.empty(n)
    for i in range(n):
        bit = np.random.Philox(key=(np.uint64(seed), np.uint64(i)))
        vals[i] = np.random.Generator(bit).random()
    return amplitude * (2.0 * vals.reshape(cells) - 1.0)


def _bubble_theta_p(grid: Grid, config: ScenarioConfig):
    coords = grid.coordinate_fields()
    center = [0.5 * WARM_BUBBLE_EXTENT[0]] * (grid.dim - 1) \
        + [0.4 * WARM_BUBBLE_EXTENT[1]]
    r = np.sqrt(sum((c - c0) ** 2 for c, c0 in zip(coords, center)))
    if config.literal_bubble:
        arg = np.pi * r / 2.0
    else:
        arg = np.pi * (r / WARM_BUBBLE_RADIUS) / 2.0
    return np.where(r <= WARM_BUBBLE_RADIUS, 2.0 * np.cos(arg) ** 2, 0.0)


def warm_bubble_init(config: ScenarioConfig,
                     consts: PhysConsts = PhysConsts()) -> ScenarioState:
    """Warm bubble in a 300 K background on [0,7000] x [0,5000] m.

    The buoyant temperature anomaly is compensated in the density so that
    the pressure variable starts exactly at zero; the flow is at rest.
    """
    if config.scenario != "warm_bubble":
        raise ValueError("config does not describe a warm bubble")
    extent = [WARM_BUBBLE_EXTENT[0]] * (config.dim - 1) + [WARM_BUBBLE_EXTENT[1]]
    spacing = tuple(extent[a] / config.cells[a] for a in range(config.dim))
    grid = build_grid(GridSpec(config.dim, config.cells, spacing))
    bc = BoundarySpec(("wall",) * config.dim)
    theta_bar = 300.0
    bg = hydrostatic_background(theta_bar, grid, consts)

    theta_p = _bubble_theta_p(grid, config)
    # rho' chosen so (rho theta)' = 0: the bubble is a pure buoyancy anomaly
    rho_p = -bg.rho_bar * theta_p / (theta_bar + theta_p)
    rho = bg.rho_bar + rho_p
    flow = FlowState(rho_p=rho_p,
                     rho_u=[grid.zeros() for _ in range(config.dim)],
                     rho_theta_p=grid.zeros())

    wq = np.zeros((3,) + grid.cells)
    ratio = 0.0
    if config.perturb == "initial":
        wq[0] = 0.02 * theta_p * rho
        ratio = config.nu
    else:
        wq[0] = 0.08 * theta_p * rho
        wq[1] = 1.0e-3 * theta_p * rho
        wq[2] = 1.0e-5 * theta_p * rho
    modes = parameter_perturbation_setup(config)
    return ScenarioState(grid=grid, bc=bc, theta_profile=theta_bar, flow=flow,
                         wq=wq, qv_mode1_ratio=ratio, param_modes=modes,
                         bottom=config.bottom)


def rayleigh_benard_init(config: ScenarioConfig,
                         consts: PhysConsts = PhysConsts()) -> ScenarioState:
    """Moist convection between plates at 284 K (bottom) and 283 K (top).

    Lateral boundaries are periodic; the temperature anomaly is a seeded
    per-cell uniform perturbation that triggers the instability.
    """
    if config.scenario != "rayleigh_benard":
        raise ValueError("config does not describe a Rayleigh-Benard cell")
    extent = [RB_EXTENT[0]] * (config.dim - 1) + [RB_EXTENT[1]]
    spacing = tuple(extent[a] / config.cells[a] for a in range(config.dim))
    grid = build_grid(GridSpec(config.dim, config.cells, spacing))
    vert = grid.vertical_axis
    kinds = ("periodic",) * (config.dim - 1) + ("wall",)
    top = RB_EXTENT[1]

    def profile(x3):
        return 284.0 - x3 / 1000.0

    bc = BoundarySpec(kinds, theta_dirichlet={vert: (profile(0.0), profile(top))})
    bg = hydrostatic_background(profile, grid, consts)

    eta = eta_field(config.seed, grid.cells)
    flow = FlowState(rho_p=grid.zeros(),
                     rho_u=[grid.zeros() for _ in range(config.dim)],
                     rho_theta_p=bg.rho_bar * eta)

    wq = np.zeros((3,) + grid.cells)
    wq[0] = 2.0e-5 * bg.theta_bar * bg.rho_bar
    ratio = config.nu if config.perturb == "initial" else 0.0
    modes = parameter_perturbation_setup(config)
    return ScenarioState(grid=grid, bc=bc, theta_profile=profile, flow=flow,
                         wq=wq, qv_mode1_ratio=ratio, param_modes=modes,
                         bottom=config.bottom)


def parameter_perturbation_setup(config: ScenarioConfig,
                                 params: MicroParams = MicroParams()) -> dict:
    """Mode expansions for an uncertain process parameter.

    Returns {} for deterministic or initial-data perturbations, otherwise a
    single-entry dict mapping the parameter name to its [mode0, mode1] pair
    with mode1 = nu * mode0.
    """
    if config.perturb in ("none", "initial"):
        return {}
    base = {"k1": params.k1, "k2": params.k2, "alpha": params.alpha}
    p0 = base[config.perturb]
    return {config.perturb: [p0, config.nu * p0]}


def initialize(config: ScenarioConfig,
               consts: PhysConsts = PhysConsts()) -> ScenarioState:
    if config.scenario == "warm_bubble":
        return warm_bubble_init(config, consts)
    return rayleigh_benard_init(config, consts)
