import numpy as np
import pytest

from biconj import (
    DualGrid,
    Grid,
    PropernessError,
    SampledFunction,
    ValidationError,
    eval_interp,
    make_grid,
    sample,
    spec,
)


class TestGrid:
    def test_points_exact_on_dyadic_bounds(self):
        g = make_grid(-4.0, 4.0, 9)
        np.testing.assert_array_equal(g.axis_points(), np.arange(-4.0, 5.0, 1.0))
        assert g.spacing == 1.0
        assert g.point(0) == -4.0 and g.point(8) == 4.0

    def test_spacing_and_endpoint_reproduction(self):
        g = make_grid(-1.0, 2.0, 7)
        assert g.axis_points()[-1] == pytest.approx(2.0, abs=1e-15)
        assert g.n == 7

    def test_rejects_bad_n(self):
        with pytest.raises(ValidationError) as e:
            make_grid(0.0, 1.0, 2)
        assert e.value.field == "n"
        with pytest.raises(ValidationError):
            make_grid(0.0, 1.0, 1)

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValidationError) as e:
            make_grid(1.0, 1.0, 5)
        assert e.value.field == "hi"
        with pytest.raises(ValidationError):
            make_grid(2.0, -2.0, 5)

    def test_rejects_nonfinite_bounds(self):
        with pytest.raises(ValidationError):
            make_grid(-np.inf, 1.0, 5)
        with pytest.raises(ValidationError):
            make_grid(0.0, np.nan, 5)

    def test_rejects_bad_dim(self):
        with pytest.raises(ValidationError) as e:
            make_grid(0.0, 1.0, 5, dim=3)
        assert e.value.field == "dim"

    def test_nearest_index_snaps_and_clips(self):
        g = make_grid(0.0, 4.0, 5)
        assert g.nearest_index(1.9) == 2
        assert g.nearest_index(2.0) == 2
        assert g.nearest_index(-100.0) == 0
        assert g.nearest_index(100.0) == 4

    def test_nearest_index_2d(self):
        g = make_grid(0.0, 4.0, 5, dim=2)
        assert g.nearest_index([1.1, 3.9]) == (1, 4)
        assert isinstance(g.point((1, 4)), np.ndarray)

    def test_points_are_write_locked(self):
        g = make_grid(0.0, 1.0, 5)
        with pytest.raises(ValueError):
            g.axis_points()[0] = 7.0

    def test_dual_grid_is_a_grid(self):
        d = DualGrid(-2.0, 2.0, 9)
        assert isinstance(d, Grid)
        assert d.spacing == 0.5


class TestSampledFunction:
    def test_accepts_plus_inf(self):
        f = SampledFunction(make_grid(0.0, 1.0, 3), [0.0, np.inf, 1.0])
        assert np.isinf(f.values[1])
        np.testing.assert_array_equal(f.finite_mask(), [True, False, True])

    def test_rejects_nan(self):
        with pytest.raises(ValidationError) as e:
            SampledFunction(make_grid(0.0, 1.0, 3), [0.0, np.nan, 1.0])
        assert e.value.field == "values"
        assert "NaN" in str(e.value)

    def test_rejects_minus_inf(self):
        with pytest.raises(ValidationError) as e:
            SampledFunction(make_grid(0.0, 1.0, 3), [0.0, -np.inf, 1.0])
        assert "-inf" in str(e.value)

    def test_properness_enforced(self):
        with pytest.raises(PropernessError) as e:
            SampledFunction(make_grid(0.0, 1.0, 3), [np.inf, np.inf, np.inf])
        assert "properness violated" in str(e.value)
        # PropernessError is a config-grade validation error
        assert isinstance(e.value, ValidationError)

    def test_shape_must_match_grid(self):
        with pytest.raises(ValidationError):
            SampledFunction(make_grid(0.0, 1.0, 3), [0.0, 1.0])
        with pytest.raises(ValidationError):
            SampledFunction(make_grid(0.0, 1.0, 3, dim=2), np.zeros(3))

    def test_values_are_copied_and_locked(self):
        src = np.array([0.0, 1.0, 2.0])
        f = SampledFunction(make_grid(0.0, 1.0, 3), src)
        src[0] = 99.0
        assert f.values[0] == 0.0
        with pytest.raises(ValueError):
            f.values[0] = 5.0


class TestSample:
    def test_quadratic_values(self):
        g = make_grid(-2.0, 2.0, 5)
        f = sample(spec("quadratic", a=2.0), g)
        np.testing.assert_array_equal(f.values, [4.0, 1.0, 0.0, 1.0, 4.0])

    def test_2d_sampling_uses_meshgrid_convention(self):
        g = make_grid(-1.0, 1.0, 3, dim=2)
        f = sample(spec("quadratic", a=2.0), g)
        # values[i, j] = |(x_i, x_j)|^2 for a = 2
        assert f.values[0, 0] == 2.0
        assert f.values[0, 1] == 1.0
        assert f.values[1, 1] == 0.0

    def test_indicator_outside_window_is_improper(self):
        g = make_grid(-1.0, 1.0, 33)
        with pytest.raises(PropernessError):
            sample(spec("indicator", lo=100.0, hi=101.0), g)


class TestEvalInterp:
    def test_exact_at_nodes_and_linear_between(self):
        g = make_grid(0.0, 2.0, 3)
        f = SampledFunction(g, [0.0, 4.0, 6.0])
        assert eval_interp(f, 0.0) == 0.0
        assert eval_interp(f, 1.0) == 4.0
        assert eval_interp(f, 0.5) == 2.0
        assert eval_interp(f, 1.5) == 5.0

    def test_inf_absorbs_between_nodes_but_not_at_far_node(self):
        g = make_grid(0.0, 2.0, 3)
        f = SampledFunction(g, [0.0, np.inf, 6.0])
        assert eval_interp(f, 0.5) == np.inf
        assert eval_interp(f, 0.0) == 0.0  # exact hit on a finite node
        assert eval_interp(f, 2.0) == 6.0

    def test_out_of_domain_rejected(self):
        f = SampledFunction(make_grid(0.0, 1.0, 3), [0.0, 1.0, 2.0])
        with pytest.raises(ValidationError):
            eval_interp(f, -0.1)
        with pytest.raises(ValidationError):
            eval_interp(f, 1.1)

    def test_bilinear_2d(self):
        g = make_grid(0.0, 1.0, 3, dim=2)
        vals = np.add.outer(g.axis_points(), g.axis_points())  # f(x, y) = x + y
        f = SampledFunction(g, vals)
        assert eval_interp(f, [0.25, 0.75]) == pytest.approx(1.0, abs=1e-15)
        assert eval_interp(f, [0.5, 0.5]) == 1.0

    def test_2d_inf_corner_absorbs_only_with_positive_weight(self):
        g = make_grid(0.0, 1.0, 3, dim=2)
        vals = np.zeros((3, 3))
        vals[1, 1] = np.inf
        f = SampledFunction(g, vals)
        assert eval_interp(f, [0.25, 0.25]) == np.inf
        # query on the far edge never touches the inf node
        assert eval_interp(f, [1.0, 0.25]) == 0.0

    def test_random_node_hits_round_trip(self):
        rng = np.random.default_rng(7)
        g = make_grid(-3.0, 3.0, 13)
        f = SampledFunction(g, rng.uniform(-5, 5, 13))
        for i in range(13):
            assert eval_interp(f, g.point(i)) == f.values[i]
