import numpy as np
import pytest

from cloudsg import gpc, scenarios
from cloudsg.constants import MicroParams
from cloudsg.scenarios import ScenarioConfig


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ScenarioConfig(scenario="tornado")
        with pytest.raises(ValueError):
            ScenarioConfig(nu=1.0)
        with pytest.raises(ValueError):
            ScenarioConfig(nu=-0.1)
        with pytest.raises(ValueError):
            ScenarioConfig(perturb="k9")
        with pytest.raises(ValueError):
            ScenarioConfig(dim=2, cells=(10, 10, 10))

    def test_scenario_mismatch(self):
        cfg = ScenarioConfig(scenario="rayleigh_benard", cells=(10, 8))
        with pytest.raises(ValueError):
            scenarios.warm_bubble_init(cfg)
        with pytest.raises(ValueError):
            scenarios.rayleigh_benard_init(ScenarioConfig(cells=(10, 8)))


class TestWarmBubble:
    def test_anomaly_against_recomputation(self):
        st = scenarios.warm_bubble_init(ScenarioConfig(cells=(140, 100)))
        g = st.grid
        from cloudsg.thermo import hydrostatic_background
        bg = hydrostatic_background(300.0, g)
        x, z = g.coordinate_fields()
        r = np.hypot(x - 3500.0, z - 2000.0)
        theta_p = np.where(r <= 2000.0,
                           2.0 * np.cos(np.pi * r / 4000.0) ** 2, 0.0)
        expect = -bg.rho_bar * theta_p / (300.0 + theta_p)
        assert np.allclose(st.flow.rho_p, expect, rtol=0, atol=1e-15)
        # recover theta' from rho' and check the 2 K peak near the center
        theta_c = -300.0 * st.flow.rho_p / (bg.rho_bar + st.flow.rho_p)
        assert abs(np.max(theta_c) - 2.0) < 1e-2
        # corners lie outside the bubble
        assert st.flow.rho_p[0, 0] == 0.0
        assert np.all(st.wq[:, 0, 0] == 0.0)

    def test_pressure_variable_starts_at_zero(self):
        st = scenarios.warm_bubble_init(ScenarioConfig(cells=(16, 12)))
        assert np.max(np.abs(st.flow.rho_theta_p)) < 1e-12
        assert all(np.all(m == 0.0) for m in st.flow.rho_u)

    def test_axisymmetry(self):
        st = scenarios.warm_bubble_init(ScenarioConfig(cells=(14, 10)))
        # mirror symmetry about the vertical line through the center
        assert np.allclose(st.flow.rho_p, st.flow.rho_p[::-1, :], atol=0)
        assert np.allclose(st.wq, st.wq[:, ::-1, :], atol=0)

    def test_cloud_proportions(self):
        st = scenarios.warm_bubble_init(ScenarioConfig(cells=(16, 12)))
        mask = st.wq[0] > 0
        assert np.allclose(st.wq[1][mask] / st.wq[0][mask], 1e-3 / 0.08)
        assert np.allclose(st.wq[2][mask] / st.wq[0][mask], 1e-5 / 0.08)

    def test_stochastic_variant(self):
        cfg = ScenarioConfig(cells=(16, 12), perturb="initial", nu=0.1)
        st = scenarios.warm_bubble_init(cfg)
        assert np.all(st.wq[1] == 0.0) and np.all(st.wq[2] == 0.0)
        basis = gpc.basis_init(3)
        chat = st.cloud_modes(basis)
        assert np.allclose(chat[0, 1], 0.1 * chat[0, 0], atol=0)
        assert np.max(np.abs(chat[:, 2:])) == 0.0
        assert np.max(np.abs(chat[1:, 1])) == 0.0
        # nodal realization consistent with the expansion
        node = st.cloud_at_node(0.5)
        assert np.allclose(node[0], chat[0, 0] + 0.5 * chat[0, 1], atol=0)

    def test_literal_bubble_oscillates(self):
        smooth = scenarios.warm_bubble_init(ScenarioConfig(cells=(40, 30)))
        literal = scenarios.warm_bubble_init(
            ScenarioConfig(cells=(40, 30), literal_bubble=True))
        assert not np.allclose(smooth.flow.rho_p, literal.flow.rho_p)

    def test_three_dimensional(self):
        st = scenarios.warm_bubble_init(ScenarioConfig(dim=3, cells=(8, 8, 6)))
        assert st.grid.cells == (8, 8, 6)
        assert len(st.flow.rho_u) == 3


class TestRayleighBenard:
    def test_background_profile(self):
        cfg = ScenarioConfig(scenario="rayleigh_benard", cells=(10, 8))
        st = scenarios.rayleigh_benard_init(cfg)
        assert st.theta_profile(0.0) == 284.0
        assert st.theta_profile(1000.0) == 283.0
        assert st.bc.theta_dirichlet[1] == (284.0, 283.0)
        assert st.bc.kinds == ("periodic", "wall")

    def test_vapor_loading(self):
        cfg = ScenarioConfig(scenario="rayleigh_benard", cells=(10, 8))
        st = scenarios.rayleigh_benard_init(cfg)
        from cloudsg.thermo import hydrostatic_background
        bg = hydrostatic_background(st.theta_profile, st.grid)
        qv = st.wq[0] / bg.rho_bar
        assert np.allclose(qv, 2e-5 * bg.theta_bar, rtol=1e-14)
        # bottom row value from the plate temperature
        assert abs(qv[0, 0] - 2e-5 * st.theta_profile(
            st.grid.axis_centers[1][0])) < 1e-12

    def test_seeded_perturbation_reproducible(self):
        cfg = ScenarioConfig(scenario="rayleigh_benard", cells=(12, 6), seed=42)
        a = scenarios.rayleigh_benard_init(cfg)
        b = scenarios.rayleigh_benard_init(cfg)
        assert np.array_equal(a.flow.rho_theta_p, b.flow.rho_theta_p)
        other = scenarios.rayleigh_benard_init(
            ScenarioConfig(scenario="rayleigh_benard", cells=(12, 6), seed=43))
        assert not np.array_equal(a.flow.rho_theta_p, other.flow.rho_theta_p)

    def test_eta_bounds_and_cell_keying(self):
        eta = scenarios.eta_field(7, (12, 6))
        assert np.max(np.abs(eta)) <= 0.0021
        assert np.std(eta) > 0.0
        # per-cell keying: the shared cells of a widened grid are unchanged
        wide = scenarios.eta_field(7, (24, 3))
        assert np.array_equal(eta.ravel()[:72], wide.ravel()[:72])


class TestParameterPerturbation:
    def test_modes(self):
        p = MicroParams()
        cfg = ScenarioConfig(perturb="k1", nu=0.5)
        modes = scenarios.parameter_perturbation_setup(cfg)
        assert modes == {"k1": [p.k1, 0.5 * p.k1]}
        cfg2 = ScenarioConfig(scenario="rayleigh_benard", cells=(8, 8),
                              perturb="k2", nu=0.2)
        assert scenarios.parameter_perturbation_setup(cfg2) == \
            {"k2": [p.k2, 0.2 * p.k2]}

    def test_deterministic_empty(self):
        assert scenarios.parameter_perturbation_setup(ScenarioConfig()) == {}
        cfg = ScenarioConfig(perturb="initial", nu=0.3)
        assert scenarios.parameter_perturbation_setup(cfg) == {}

    def test_nodal_positivity_via_basis(self):
        cfg = ScenarioConfig(perturb="alpha", nu=0.5)
        st = scenarios.warm_bubble_init(cfg)
        basis = gpc.basis_init(4)
        vals = gpc.nodal_parameters(st.param_modes["alpha"], basis)
        assert np.all(vals > 0.0)
        ov = st.params_at_node(1.0)
        assert abs(ov["alpha"] - 1.5 * MicroParams().alpha) < 1e-12

    def test_extreme_node_range(self):
        cfg = ScenarioConfig(perturb="k1", nu=0.5)
        st = scenarios.warm_bubble_init(cfg)
        k1 = MicroParams().k1
        assert abs(st.params_at_node(-1.0)["k1"] - 0.5 * k1) < 1e-15
        assert abs(st.params_at_node(1.0)["k1"] - 1.5 * k1) < 1e-15
