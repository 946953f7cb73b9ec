import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloudsg.grid import (NGHOST, BoundarySpec, Grid, GridSpec, apply_boundary,
                          build_grid, field_norms, interior)


def make_grid(nx=8, nz=6, hx=10.0, hz=5.0):
    return build_grid(GridSpec(2, (nx, nz), (hx, hz)))


class TestGridSpec:
    def test_geometry(self):
        g = make_grid()
        assert g.n_cells == 48
        assert g.cell_volume == 50.0
        assert g.h_min == 5.0
        assert g.vertical_axis == 1
        assert g.extent(0) == 80.0
        np.testing.assert_allclose(g.cell_center((0, 0)), (5.0, 2.5))
        np.testing.assert_allclose(g.axis_centers[1][-1], 27.5)

    def test_origin_offset(self):
        g = build_grid(GridSpec(2, (4, 4), (1.0, 1.0), origin=(-2.0, 3.0)))
        np.testing.assert_allclose(g.cell_center((0, 0)), (-1.5, 3.5))

    def test_rejects_bad_spec(self):
        with pytest.raises(ValueError):
            GridSpec(4, (4, 4, 4, 4), (1.0,) * 4)
        with pytest.raises(ValueError):
            GridSpec(2, (3, 8), (1.0, 1.0))
        with pytest.raises(ValueError):
            GridSpec(2, (8, 8), (1.0, -1.0))
        with pytest.raises(ValueError):
            GridSpec(2, (8,), (1.0,))

    def test_3d(self):
        g = build_grid(GridSpec(3, (4, 5, 6), (1.0, 1.0, 2.0)))
        assert g.vertical_axis == 2
        assert g.n_cells == 120
        assert g.coordinate_fields()[2].shape == (4, 5, 6)


class TestBoundarySpec:
    def test_periodic_rules(self):
        bc = BoundarySpec(("periodic", "periodic"))
        assert bc.rules("scalar") == [("periodic",) * 2, ("periodic",) * 2]
        assert bc.rules("momentum0") == [("periodic",) * 2, ("periodic",) * 2]

    def test_wall_rules(self):
        bc = BoundarySpec(("periodic", "wall"))
        assert bc.rules("momentum1")[1] == ("odd", "odd")
        assert bc.rules("momentum0")[1] == ("even", "even")
        assert bc.rules("scalar")[1] == ("even", "even")

    def test_theta_dirichlet(self):
        bc = BoundarySpec(("periodic", "wall"), {1: (284.0, 283.0)})
        lo, hi = bc.rules("theta")[1]
        assert lo == ("dirichlet", 284.0)
        assert hi == ("dirichlet", 283.0)
        # other scalars are unaffected
        assert bc.rules("scalar")[1] == ("even", "even")

    def test_dirichlet_requires_wall(self):
        with pytest.raises(ValueError):
            BoundarySpec(("periodic", "periodic"), {1: (284.0, 283.0)})

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            BoundarySpec(("periodic", "outflow"))


class TestApplyBoundary:
    def test_periodic_wrap(self):
        f = np.arange(24.0).reshape(6, 4)
        p = apply_boundary(f, [("periodic",) * 2, ("periodic",) * 2])
        assert p.shape == (10, 8)
        np.testing.assert_array_equal(p[0:2, 2:-2], f[-2:, :])
        np.testing.assert_array_equal(p[-2:, 2:-2], f[0:2, :])
        np.testing.assert_array_equal(interior(p), f)

    def test_even_odd_mirror(self):
        f = np.arange(1.0, 25.0).reshape(6, 4)
        p = apply_boundary(f, [("even", "even"), ("odd", "odd")])
        np.testing.assert_array_equal(p[1, 2:-2], f[0, :])
        np.testing.assert_array_equal(p[0, 2:-2], f[1, :])
        np.testing.assert_array_equal(p[2:-2, 1], -f[:, 0])
        np.testing.assert_array_equal(p[2:-2, 0], -f[:, 1])

    def test_dirichlet_face_value(self):
        f = np.full((4, 4), 3.0)
        p = apply_boundary(f, [("even", "even"), (("dirichlet", 5.0), ("dirichlet", 1.0))])
        # ghost = 2*face - interior so the face average hits the value
        assert p[2, 1] == 7.0
        assert p[2, -2] == -1.0

    def test_one_sided_periodic_rejected(self):
        f = np.zeros((4, 4))
        with pytest.raises(ValueError):
            apply_boundary(f, [("periodic", "even"), ("even", "even")])

    def test_lead_axes_unpadded(self):
        f = np.random.default_rng(1).random((3, 4, 5))
        p = apply_boundary(f, [("periodic",) * 2, ("even", "even")], lead=1)
        assert p.shape == (3, 8, 9)
        np.testing.assert_array_equal(interior(p, lead=1), f)

    def test_rule_count_checked(self):
        with pytest.raises(ValueError):
            apply_boundary(np.zeros((4, 4)), [("even", "even")])

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_refill_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        f = rng.standard_normal((5, 6))
        rules = [("periodic",) * 2, ("odd", ("dirichlet", rng.standard_normal()))]
        p1 = apply_boundary(f, rules)
        p2 = apply_boundary(interior(p1).copy(), rules)
        np.testing.assert_array_equal(p1, p2)


class TestFieldNorms:
    def test_known_values(self):
        a = np.zeros((2, 2))
        b = np.array([[3.0, 0.0], [0.0, 4.0]])
        l1, l2, linf = field_norms(a, b, volume_element=2.0)
        assert l1 == 14.0
        assert l2 == pytest.approx(np.sqrt(50.0))
        assert linf == 4.0

    def test_symmetry_and_identity(self):
        rng = np.random.default_rng(3)
        a, b = rng.random((4, 4)), rng.random((4, 4))
        assert field_norms(a, b, 1.0) == field_norms(b, a, 1.0)
        assert field_norms(a, a, 1.0) == (0.0, 0.0, 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            field_norms(np.zeros(3), np.zeros(4), 1.0)
