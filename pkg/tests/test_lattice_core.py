import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.errors import DimensionMismatch, LatticeError
from src.lattice_core import (
    BoxRegion, LatticeVector, RadialSpec, WaveVector,
    eval_f_alpha, eval_g_alpha, eval_structure_function, max_f_alpha,
    min_structure_function, nearest_neighbor_pairs, number_variance,
    psd_margin, yamada_holds, yamada_slack_1d,
)

coords = st.lists(st.integers(-6, 6), min_size=1, max_size=4)
alphas = st.floats(0.0, 4.0, allow_nan=False)


class TestGAlpha:

    def test_values(self):
        assert eval_g_alpha(0.3, (0, 0)) == 0.0
        assert eval_g_alpha(0.3, (0, -1)) == 0.3
        assert eval_g_alpha(0.3, (1, 1)) == 1.0
        assert eval_g_alpha(0.3, (2, 0, 0)) == 1.0

    def test_negative_alpha(self):
        with pytest.raises(LatticeError):
            eval_g_alpha(-0.1, (1,))

    @given(alphas, coords)
    def test_sign_and_permutation_invariant(self, alpha, x):
        g = eval_g_alpha(alpha, x)
        assert eval_g_alpha(alpha, [-c for c in x]) == g
        assert eval_g_alpha(alpha, list(reversed(x))) == g


class TestStructureFunction:

    def test_f_alpha_at_origin_and_corner(self):
        assert eval_f_alpha(0.0, WaveVector((0.0, 0.0))) == pytest.approx(5.0)
        assert eval_f_alpha(2.0, WaveVector((math.pi, math.pi))) == pytest.approx(5.0)
        assert max_f_alpha(0.0, 2) == 5.0
        assert max_f_alpha(1.0, 3) == 1.0

    def test_array_form_matches_scalar(self):
        spec = RadialSpec(0.4, 0.1, 2)
        ks = np.array([[0.0, 0.0], [0.3, -1.2], [math.pi, 2.0]])
        arr = eval_structure_function(spec, ks)
        npt.assert_allclose(arr, [eval_structure_function(spec, WaveVector(tuple(k))) for k in ks])

    def test_wrong_dimension(self):
        spec = RadialSpec(0.0, 0.1, 2)
        with pytest.raises(DimensionMismatch):
            eval_structure_function(spec, WaveVector((0.0, 0.0, 0.0)))

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 2.0])
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_threshold_at_upper_bound(self, alpha, d):
        rf = 1.0 / max_f_alpha(alpha, d)
        at = RadialSpec(alpha, rf, d)
        above = RadialSpec(alpha, rf + 1e-3, d)
        assert psd_margin(at) == pytest.approx(0.0, abs=1e-15)
        assert psd_margin(above) < 0
        assert abs(min_structure_function(at)[0]) <= 1e-9
        assert min_structure_function(above)[0] < -1e-4

    def test_minimiser_location(self):
        _, k = min_structure_function(RadialSpec(0.0, 0.2, 2))
        npt.assert_allclose(k.components, (0.0, 0.0), atol=1e-12)
        _, k = min_structure_function(RadialSpec(2.0, 0.2, 2))
        npt.assert_allclose(np.abs(k.components), (math.pi, math.pi), atol=1e-12)

    def test_separable_branch_high_dimension(self):
        spec = RadialSpec(0.0, 1.0 / max_f_alpha(0.0, 5), 5)
        value, k = min_structure_function(spec)
        assert k.dim == 5
        assert value == pytest.approx(0.0, abs=1e-12)

    @given(alphas, st.floats(0.0, 1.0), st.lists(st.floats(-4, 4), min_size=2, max_size=2))
    def test_even_in_k(self, alpha, rho, k):
        spec = RadialSpec(alpha, rho, 2)
        a = eval_structure_function(spec, WaveVector(tuple(k)))
        b = eval_structure_function(spec, WaveVector(tuple(-c for c in k)))
        assert a == pytest.approx(b, abs=1e-12)

    @given(alphas, st.floats(0.0, 1.0), st.lists(st.floats(-4, 4), min_size=3, max_size=3),
           st.integers(0, 2), st.integers(-3, 3))
    def test_periodic_in_each_component(self, alpha, rho, k, axis, turns):
        spec = RadialSpec(alpha, rho, 3)
        shifted = list(k)
        shifted[axis] += 2 * math.pi * turns
        a = eval_structure_function(spec, WaveVector(tuple(k)))
        b = eval_structure_function(spec, WaveVector(tuple(shifted)))
        assert a == pytest.approx(b, abs=1e-9)


class TestTypes:

    def test_radial_spec_validation(self):
        with pytest.raises(LatticeError):
            RadialSpec(0.0, 1.5, 2)
        with pytest.raises(LatticeError):
            RadialSpec(-1.0, 0.5, 2)
        with pytest.raises(LatticeError):
            RadialSpec(0.0, 0.5, 0)

    def test_pair_target(self):
        spec = RadialSpec(0.5, 0.2, 2)
        assert spec.pair_target((0, 0)) == 0.2
        assert spec.pair_target((1, 0)) == pytest.approx(0.02)
        assert spec.pair_target((1, 1)) == pytest.approx(0.04)
        with pytest.raises(DimensionMismatch):
            spec.pair_target((1, 0, 0))

    def test_vector_ops(self):
        a, b = LatticeVector((1, 2)), LatticeVector((3, -1))
        assert (a - b).coords == (-2, 3)
        assert (-a).coords == (-1, -2)
        assert b.norm2 == 10
        with pytest.raises(DimensionMismatch):
            a - LatticeVector((1,))

    def test_box_shrink(self):
        core = BoxRegion((10, 8)).shrink(2)
        assert core.side_lengths == (6, 4)
        assert core.origin.coords == (2, 2)
        with pytest.raises(LatticeError):
            BoxRegion((4, 4)).shrink(2)


class TestNumberVariance:

    def test_nearest_neighbor_pairs(self):
        assert nearest_neighbor_pairs(BoxRegion((3, 4))) == 17
        assert nearest_neighbor_pairs(BoxRegion.interval(10)) == 9
        assert nearest_neighbor_pairs(BoxRegion((1, 1, 1))) == 0

    @pytest.mark.parametrize("n", [1, 5, 40])
    def test_alpha_one_is_binomial(self, n):
        spec = RadialSpec(1.0, 0.3, 1)
        assert number_variance(spec, BoxRegion.interval(n)) == pytest.approx(0.3 * n * 0.7)

    def test_exclusion_values(self):
        spec = RadialSpec(0.0, 0.25, 1)
        assert number_variance(spec, BoxRegion.interval(2)) == pytest.approx(0.25)
        assert number_variance(spec, BoxRegion.interval(1)) == pytest.approx(0.1875)
        assert yamada_holds(spec, BoxRegion.interval(2))
        assert yamada_holds(spec, BoxRegion.interval(1))

    def test_yamada_fails_above_bound(self):
        spec = RadialSpec(0.0, 0.45, 1)
        assert number_variance(spec, BoxRegion.interval(10)) == pytest.approx(-1.17)
        assert not yamada_holds(spec, BoxRegion.interval(10))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            number_variance(RadialSpec(0.0, 0.1, 2), BoxRegion.interval(4))

    def test_slack_matches_scalar_check(self):
        rhos = np.linspace(0.0, 1.0, 21)
        slack = yamada_slack_1d(0.3, rhos[:, None], np.arange(1, 12)[None, :])
        for i, r in enumerate(rhos):
            for j, n in enumerate(range(1, 12)):
                ok = yamada_holds(RadialSpec(0.3, float(r), 1), BoxRegion.interval(n))
                assert ok == (slack[i, j] >= -1e-12)
