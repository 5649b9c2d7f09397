import math

import numpy as np
import pytest

from biconj import (
    ActivityMask,
    DualGrid,
    PropernessError,
    SampledFunction,
    ValidationError,
    activity_map,
    biconjugate,
    biconjugate_via_conjugation,
    conjugate_bruteforce,
    conjugate_llt,
    derive_dual_grid,
    lower_hull_indices,
    make_grid,
    sample,
    spec,
)

from _corpus import dyadic_corpus, dyadic_dual, random_corpus


# ---------------------------------------------------------------------------
# Independent oracle: direct per-node enumeration in pure Python
# ---------------------------------------------------------------------------


def oracle_conjugate(f, dual):
    """Reference conjugate: literal max_i (x_i * y_j - f_i), first maximizer
    wins.  Deliberately scalar/pure-Python so it shares no code with the
    engines under test."""
    xs = f.grid.axis_points()
    vals = f.values
    out = []
    args = []
    for y in dual.axis_points():
        best = -math.inf
        best_i = 0
        for i in range(len(xs)):
            v = vals[i]
            if v == math.inf:
                continue
            c = xs[i] * y - v
            if c > best:
                best = c
                best_i = i
        out.append(best)
        args.append(best_i)
    return np.array(out), np.array(args)


def oracle_conjugate_2d(f, dual):
    """Joint 2D enumeration (no per-axis factorization).  Summation order
    differs from the engines', so agreement is up to rounding only."""
    xs = f.grid.axis_points()
    ys = dual.axis_points()
    n, m = f.grid.n, dual.n
    out = np.full((m, m), -math.inf)
    for j1 in range(m):
        for j2 in range(m):
            best = -math.inf
            for i1 in range(n):
                for i2 in range(n):
                    v = f.values[i1, i2]
                    if v == math.inf:
                        continue
                    c = xs[i1] * ys[j1] + xs[i2] * ys[j2] - v
                    best = max(best, c)
            out[j1, j2] = best
    return out


class TestEnginesAgainstOracle:
    def test_dyadic_corpus_exact_with_argmax(self):
        for f in dyadic_corpus(seed=101, count=25, with_inf=True):
            dual = dyadic_dual()
            want, want_arg = oracle_conjugate(f, dual)
            for engine in (conjugate_bruteforce, conjugate_llt):
                got, arg = engine(f, dual, return_argmax=True)
                np.testing.assert_array_equal(got.values, want)
                np.testing.assert_array_equal(arg, want_arg)

    def test_random_corpus_exact_values(self):
        for f in random_corpus(seed=202, count=25, nmax=64):
            dual = derive_dual_grid(f)
            want, _ = oracle_conjugate(f, dual)
            for engine in (conjugate_bruteforce, conjugate_llt):
                got = engine(f, dual)
                np.testing.assert_array_equal(got.values, want)

    def test_engines_bitwise_identical_on_larger_random_corpus(self):
        for f in random_corpus(seed=303, count=40, nmax=256):
            dual = derive_dual_grid(f)
            a = conjugate_bruteforce(f, dual)
            b = conjugate_llt(f, dual)
            np.testing.assert_array_equal(a.values, b.values)


class TestFrozenExamples:
    def test_tent_min_at_zero(self):
        f = SampledFunction(make_grid(-1.0, 1.0, 3), [1.0, 0.0, 1.0])
        dual = DualGrid(-2.0, 2.0, 5)
        got = conjugate_llt(f, dual)
        # f*(y) = max(-1, |y| - 1) on these nodes; at y = 0 the center wins
        np.testing.assert_array_equal(got.values, [1.0, 0.0, 0.0, 0.0, 1.0])

    def test_abs_conjugate_is_zero_inside_unit_slope(self):
        f = sample(spec("abs"), make_grid(-2.0, 2.0, 5))
        dual = DualGrid(-2.0, 2.0, 9)
        got = conjugate_llt(f, dual)
        np.testing.assert_array_equal(
            got.values, [2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0]
        )

    def test_affine_tie_takes_smallest_index(self):
        g = make_grid(0.0, 4.0, 5)
        f = SampledFunction(g, 2.0 * g.axis_points() + 3.0)
        dual = DualGrid(0.0, 4.0, 3)  # nodes 0, 2, 4; y = 2 ties across all i
        for engine in (conjugate_bruteforce, conjugate_llt):
            got, arg = engine(f, dual, return_argmax=True)
            assert got.values[1] == -3.0
            assert arg[1] == 0  # leftmost of the 5-way tie
        # off the tie the maximizer is an endpoint
        _, arg = conjugate_llt(f, dual, return_argmax=True)
        assert arg[0] == 0 and arg[2] == 4

    def test_quadratic_self_conjugacy_within_grid_resolution(self):
        g = make_grid(-4.0, 4.0, 4097)
        f = sample(spec("quadratic", a=1.0), g)
        dual = DualGrid(-2.0, 2.0, 129)
        got = conjugate_llt(f, dual)
        y = dual.axis_points()
        assert np.abs(got.values - 0.5 * y * y).max() <= g.spacing**2

    def test_single_finite_node(self):
        f = SampledFunction(make_grid(0.0, 2.0, 3), [np.inf, 5.0, np.inf])
        dual = DualGrid(-1.0, 1.0, 3)
        got, arg = conjugate_llt(f, dual, return_argmax=True)
        np.testing.assert_array_equal(got.values, [-6.0, -5.0, -4.0])
        assert (arg == 1).all()


class TestGuards:
    def test_dual_must_be_grid(self):
        f = SampledFunction(make_grid(0.0, 1.0, 3), [0.0, 0.0, 0.0])
        with pytest.raises(ValidationError):
            conjugate_llt(f, [0.0, 1.0])

    def test_dim_mismatch(self):
        f = SampledFunction(make_grid(0.0, 1.0, 3), np.zeros(3))
        with pytest.raises(ValidationError):
            conjugate_llt(f, DualGrid(0.0, 1.0, 3, dim=2))

    def test_argmax_is_1d_only(self):
        f = sample(spec("quadratic"), make_grid(-1.0, 1.0, 5, dim=2))
        with pytest.raises(ValidationError):
            conjugate_llt(f, DualGrid(-1.0, 1.0, 5, dim=2), return_argmax=True)

    def test_derive_dual_count_guard(self):
        f = SampledFunction(make_grid(0.0, 1.0, 3), [0.0, 0.0, 0.0])
        with pytest.raises(ValidationError):
            derive_dual_grid(f, count=2)


class TestLowerHull:
    def test_strictly_convex_keeps_everything(self):
        xs = [0.0, 1.0, 2.0, 3.0]
        fs = [0.0, -1.0, -1.5, -1.0]
        assert lower_hull_indices(xs, fs) == [0, 1, 2, 3]

    def test_spike_is_popped(self):
        assert lower_hull_indices([0.0, 1.0, 2.0], [0.0, 1.0, 0.0]) == [0, 2]

    def test_collinear_points_are_kept(self):
        xs = [0.0, 1.0, 2.0, 3.0]
        fs = [1.0, 1.5, 2.0, 2.5]
        assert lower_hull_indices(xs, fs) == [0, 1, 2, 3]

    def test_one_ulp_above_chord_is_popped(self):
        mid = np.nextafter(0.5, 1.0)
        assert lower_hull_indices([0.0, 1.0, 2.0], [0.0, float(mid), 1.0]) == [0, 2]

    def test_one_ulp_below_chord_is_kept(self):
        mid = np.nextafter(0.5, -1.0)
        assert lower_hull_indices([0.0, 1.0, 2.0], [0.0, float(mid), 1.0]) == [0, 1, 2]

    def test_inf_nodes_skipped(self):
        xs = [0.0, 1.0, 2.0]
        fs = [0.0, math.inf, 0.0]
        assert lower_hull_indices(xs, fs) == [0, 2]

    def test_exact_sign_on_adversarial_near_collinear_data(self):
        # values engineered so the fp cross product is far below the filter:
        # only exact rational evaluation classifies them correctly
        xs = [0.0, 1.0, 2.0]
        base = 1e16  # slopes ~1e16 make the fp cross products cancel wildly
        above = [0.0, base + 3.0, 2.0 * base + 4.0]  # bends up by 2 ulp-scale units
        below = [0.0, base + 1.0, 2.0 * base + 4.0]
        assert lower_hull_indices(xs, above) == [0, 2]
        assert lower_hull_indices(xs, below) == [0, 1, 2]


class TestTwoD:
    def test_factorized_engines_match_joint_oracle(self):
        rng = np.random.default_rng(17)
        g = make_grid(-1.0, 1.0, 7, dim=2)
        vals = rng.uniform(-3.0, 3.0, size=(7, 7))
        vals[rng.random((7, 7)) < 0.15] = np.inf
        f = SampledFunction(g, vals)
        dual = DualGrid(-4.0, 4.0, 9, dim=2)
        want = oracle_conjugate_2d(f, dual)
        for engine in (conjugate_bruteforce, conjugate_llt):
            got = engine(f, dual)
            # summation order differs between joint and factorized routes
            np.testing.assert_allclose(got.values, want, rtol=0, atol=1e-12)

    def test_engines_bitwise_identical_2d(self):
        rng = np.random.default_rng(23)
        g = make_grid(-2.0, 2.0, 17, dim=2)
        f = SampledFunction(g, rng.uniform(-5.0, 5.0, size=(17, 17)))
        dual = derive_dual_grid(f)
        a = conjugate_bruteforce(f, dual)
        b = conjugate_llt(f, dual)
        np.testing.assert_array_equal(a.values, b.values)

    def test_2d_biconjugate_bridges_a_saddle_dip(self):
        # f(x, y) = x*y has a strictly negative biconjugate dip at the center
        # of the box that no per-axis construction can reproduce
        g = make_grid(-1.0, 1.0, 9, dim=2)
        X, Y = np.meshgrid(g.axis_points(), g.axis_points(), indexing="ij")
        f = SampledFunction(g, X * Y)
        b = biconjugate(f)
        assert (b.values <= f.values).all()
        assert b.values[4, 4] < -0.49  # envelope of the saddle near -|corner|

    def test_2d_biconjugate_fixed_on_convex(self):
        g = make_grid(-2.0, 2.0, 17, dim=2)
        f = sample(spec("quadratic2d", a=1.0, b=0.5, c=0.3), g)
        b = biconjugate(f)
        assert (b.values <= f.values).all()
        # conj^2 through a finite dual underestimates only by resolution
        assert float(np.abs(b.values - f.values).max()) <= 0.05


class TestBiconjugate1D:
    def test_tent_collapses(self):
        f = SampledFunction(make_grid(-1.0, 1.0, 3), [0.0, 1.0, 0.0])
        b = biconjugate(f)
        np.testing.assert_array_equal(b.values, [0.0, 0.0, 0.0])

    def test_doublewell_bridge_frozen(self):
        g = make_grid(-2.0, 2.0, 17)
        f = sample(spec("doublewell"), g)
        b = biconjugate(f)
        x = g.axis_points()
        expected = np.where(np.abs(x) <= 1.0, 0.0, (np.abs(x) - 1.0) ** 2)
        np.testing.assert_array_equal(b.values, expected)

    def test_interior_inf_gets_bridged(self):
        f = SampledFunction(make_grid(0.0, 2.0, 3), [0.0, np.inf, 0.0])
        b = biconjugate(f)
        np.testing.assert_array_equal(b.values, [0.0, 0.0, 0.0])

    def test_inf_outside_finite_span_stays_inf(self):
        f = SampledFunction(make_grid(0.0, 3.0, 4), [np.inf, 0.0, 1.0, np.inf])
        b = biconjugate(f)
        np.testing.assert_array_equal(b.values, [np.inf, 0.0, 1.0, np.inf])

    def test_below_and_idempotent_on_random_corpus(self):
        for f in random_corpus(seed=404, count=30, nmax=128):
            b = biconjugate(f)
            assert (b.values <= f.values).all()
            b2 = biconjugate(b)
            np.testing.assert_array_equal(b2.values, b.values)  # bitwise

    def test_below_and_idempotent_on_dyadic_corpus(self):
        for f in dyadic_corpus(seed=505, count=30, with_inf=True):
            b = biconjugate(f)
            assert (b.values <= f.values).all()
            np.testing.assert_array_equal(biconjugate(b).values, b.values)

    def test_convex_inputs_are_fixed_points_bitwise(self):
        g = make_grid(-4.0, 4.0, 257)
        for name in ("quadratic", "logcosh", "quartic", "abs"):
            f = sample(spec(name), g)
            np.testing.assert_array_equal(biconjugate(f).values, f.values)

    def test_envelope_is_convex_as_sampled_up_to_chord_rounding(self):
        for f in random_corpus(seed=606, count=20, nmax=100, inf_frac=0.0):
            b = biconjugate(f).values
            bend = b[:-2] + b[2:] - 2.0 * b[1:-1]
            # chord evaluation rounds at the scale of slope * span, which can
            # exceed the values themselves; bound the wiggle accordingly
            scale = np.abs(b).max() + (b.max() - b.min())
            assert bend.min() >= -32.0 * np.spacing(scale)

    def test_conjugation_route_agrees_up_to_dual_resolution(self):
        for f in random_corpus(seed=707, count=15, nmax=80, inf_frac=0.05):
            env = biconjugate(f)
            via = biconjugate_via_conjugation(f)
            dual = derive_dual_grid(f)
            # every support line through dual nodes minorizes the envelope;
            # outside f's finite span the envelope is +inf while the
            # conjugation route extends its affine pieces, so compare only
            # where the envelope is finite
            fin = np.isfinite(env.values)
            assert (via.values[fin] <= env.values[fin] + 1e-9).all()
            slack = dual.spacing * (f.grid.hi - f.grid.lo) + 1e-9
            assert (env.values[fin] - via.values[fin] <= slack).all()


class TestAlgebraicProperties:
    def test_order_reversal_exact_any_corpus(self):
        rng = np.random.default_rng(808)
        for f in random_corpus(seed=909, count=20, nmax=128):
            bigger = f.values + rng.uniform(0.0, 3.0, size=f.grid.n)
            g = SampledFunction(f.grid, bigger)
            dual = derive_dual_grid(f)
            fs = conjugate_llt(f, dual).values
            gs = conjugate_llt(g, dual).values
            assert (gs <= fs).all()  # f <= g pointwise implies g* <= f*

    def test_fenchel_young_exact_on_dyadic(self):
        for f in dyadic_corpus(seed=111, count=20, with_inf=True):
            dual = dyadic_dual()
            fstar = conjugate_llt(f, dual).values
            lhs = f.values[:, None] + fstar[None, :]
            rhs = np.outer(f.grid.axis_points(), dual.axis_points())
            assert (lhs >= rhs).all()  # no tolerance

    def test_fenchel_young_near_exact_on_random(self):
        for f in random_corpus(seed=222, count=20, nmax=128):
            dual = derive_dual_grid(f)
            fstar = conjugate_llt(f, dual).values
            lhs = f.values[:, None] + fstar[None, :]
            rhs = np.outer(f.grid.axis_points(), dual.axis_points())
            finite = np.isfinite(lhs)
            gap = lhs[finite] - rhs[finite]
            assert gap.min() >= -1e-9  # rounding slack only

    def test_conjugate_is_midpoint_convex_exact_on_dyadic(self):
        for f in dyadic_corpus(seed=333, count=20, with_inf=True):
            v = conjugate_llt(f, dyadic_dual()).values
            assert (v[:-2] + v[2:] - 2.0 * v[1:-1] >= 0.0).all()

    def test_doubling_scale_commutes_bitwise(self):
        # (2f)*(2y) == 2 f*(y) exactly: doubling is exact in binary fp
        for f in dyadic_corpus(seed=444, count=20, with_inf=True):
            dual = dyadic_dual()
            dual2 = DualGrid(2.0 * dual.lo, 2.0 * dual.hi, dual.n)
            f2 = SampledFunction(f.grid, 2.0 * f.values)
            lhs = conjugate_llt(f2, dual2).values
            rhs = 2.0 * conjugate_llt(f, dual).values
            np.testing.assert_array_equal(lhs, rhs)


class TestDeriveDualGrid:
    def test_brackets_all_slopes_with_margin(self):
        for f in random_corpus(seed=555, count=20, nmax=64):
            v = f.values
            mask = np.isfinite(v[:-1]) & np.isfinite(v[1:])
            s = (v[1:][mask] - v[:-1][mask]) / f.grid.spacing
            dual = derive_dual_grid(f)
            assert dual.n == f.grid.n + 2
            if s.size:
                assert dual.lo < s.min() and s.max() < dual.hi

    def test_custom_count(self):
        f = SampledFunction(make_grid(0.0, 1.0, 9), np.arange(9.0) ** 2)
        dual = derive_dual_grid(f, count=33)
        assert dual.n == 35

    def test_affine_degenerate_slope_range(self):
        g = make_grid(0.0, 1.0, 5)
        f = SampledFunction(g, 3.0 * g.axis_points())
        dual = derive_dual_grid(f)
        assert dual.lo == 2.0 and dual.hi == 4.0  # 3 -+ fallback spacing 1.0

    def test_isolated_finite_nodes_fall_back(self):
        f = SampledFunction(make_grid(0.0, 2.0, 3), [np.inf, 1.0, np.inf])
        dual = derive_dual_grid(f)
        assert dual.lo == -1.0 and dual.hi == 1.0


class TestActivityMap:
    def test_tent(self):
        f = SampledFunction(make_grid(-1.0, 1.0, 3), [0.0, 1.0, 0.0])
        amap = activity_map(f)
        np.testing.assert_array_equal(amap.gap, [0.0, 1.0, 0.0])
        np.testing.assert_array_equal(amap.active, [False, True, False])
        assert amap.active_count == 1

    def test_interior_inf_counts_as_active(self):
        f = SampledFunction(make_grid(0.0, 2.0, 3), [0.0, np.inf, 0.0])
        amap = activity_map(f)
        assert amap.gap[1] == np.inf and amap.active_count == 1

    def test_outside_span_inf_is_inactive(self):
        f = SampledFunction(make_grid(0.0, 3.0, 4), [np.inf, 0.0, 1.0, np.inf])
        amap = activity_map(f)
        assert amap.active_count == 0
        np.testing.assert_array_equal(amap.gap, [0.0, 0.0, 0.0, 0.0])

    def test_mask_invariants_enforced(self):
        g = make_grid(0.0, 1.0, 3)
        with pytest.raises(ValidationError):
            ActivityMask(grid=g, active=np.array([False, False]), gap=np.zeros(3))
        with pytest.raises(ValidationError):
            ActivityMask(grid=g, active=np.zeros(3, bool), gap=np.array([0.0, -1.0, 0.0]))
        with pytest.raises(ValidationError):
            ActivityMask(grid=g, active=np.array([True, False, False]), gap=np.zeros(3))

    def test_improper_rejected_everywhere(self):
        g = make_grid(0.0, 1.0, 3)
        vals = np.array([0.0, 0.0, 0.0])
        f = SampledFunction(g, vals)
        object.__setattr__(f, "values", np.full(3, np.inf))  # bypass constructor
        for op in (
            lambda: conjugate_llt(f, DualGrid(0.0, 1.0, 3)),
            lambda: conjugate_bruteforce(f, DualGrid(0.0, 1.0, 3)),
            lambda: biconjugate(f),
            lambda: derive_dual_grid(f),
        ):
            with pytest.raises(PropernessError):
                op()
