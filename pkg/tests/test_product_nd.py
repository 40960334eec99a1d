import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.basic1d import BlockFactorProcess1D, alpha0_exclusion_factor, constant_process, thin
from src.errors import DimensionMismatch, LatticeError, NotGAlphaProfile, RecordParseError
from src.lattice_core import BoxRegion
from src.product_nd import (
    FieldSample, ProductProcessND, axis_pair_expectation, case_table, exact_pair_expectation,
    field_from_text, field_to_text, realize, sample_box, verify_against_target,
)


@pytest.fixture
def exclusion2():
    return realize(alpha0_exclusion_factor(), 2)


class TestRealize:

    def test_density_is_power(self, exclusion2):
        assert exclusion2.gamma == pytest.approx(0.25)
        assert exclusion2.rho == pytest.approx(1 / 16)
        assert exclusion2.alpha == pytest.approx(0.0, abs=1e-15)
        assert realize(alpha0_exclusion_factor(), 3).rho == pytest.approx(1 / 64)

    def test_rejects_non_g_alpha_profile(self):
        q = [0.0] * 8
        q[5] = q[7] = 1.0
        with pytest.raises(NotGAlphaProfile):
            realize(BlockFactorProcess1D(3, 0.5, tuple(q)), 2)

    def test_rejects_one_dimension(self):
        with pytest.raises(LatticeError):
            realize(alpha0_exclusion_factor(), 1)

    def test_empty_process_takes_label(self):
        proc = realize(constant_process(0.0), 2, alpha=0.3)
        assert proc.alpha == 0.3
        assert proc.rho == 0.0

    def test_underflowing_density_squared(self):
        proc = realize(thin(alpha0_exclusion_factor(), 1e-170), 2)
        assert proc.alpha == 1.0
        assert proc.gamma == pytest.approx(0.25e-170, rel=1e-12)
        assert realize(thin(alpha0_exclusion_factor(), 1e-170), 2, alpha=0.0).alpha == 0.0

    def test_mixed_profiles_rejected(self):
        a, b = alpha0_exclusion_factor(0.5), alpha0_exclusion_factor(0.3)
        with pytest.raises(LatticeError):
            ProductProcessND(2, (a, b), 0.0)


class TestExactExpectations:

    def test_axis_factor_on_and_off_line(self, exclusion2):
        # same line along axis 2, one step apart
        assert axis_pair_expectation(exclusion2, 2, (3, 4), (3, 5)) == pytest.approx(0.0, abs=1e-15)
        assert axis_pair_expectation(exclusion2, 1, (3, 4), (3, 5)) == pytest.approx(1 / 16)
        assert axis_pair_expectation(exclusion2, 1, (3, 4), (3, 4)) == pytest.approx(0.25)

    def test_axis_index_range(self, exclusion2):
        with pytest.raises(LatticeError):
            axis_pair_expectation(exclusion2, 0, (0, 0), (1, 0))
        with pytest.raises(LatticeError):
            axis_pair_expectation(exclusion2, 3, (0, 0), (1, 0))

    def test_dimension_mismatch(self, exclusion2):
        with pytest.raises(DimensionMismatch):
            exact_pair_expectation(exclusion2, (0, 0), (1, 0, 0))

    def test_case_table(self, exclusion2):
        rows = {r.case: r for r in case_table(exclusion2)}
        assert rows["a) same site"].value == pytest.approx(1 / 16)
        assert rows["b) nearest neighbour, axis 1"].value == pytest.approx(0.0, abs=1e-15)
        assert rows["b) nearest neighbour, axis 2"].value == pytest.approx(0.0, abs=1e-15)
        assert rows["c) diagonal"].value == pytest.approx(1 / 256)
        assert rows["d) distance two, axis 1"].value == pytest.approx(1 / 256)
        for r in rows.values():
            assert r.value == pytest.approx(r.target, abs=1e-12)

    @pytest.mark.parametrize("d", [2, 3])
    def test_verification_passes(self, d):
        rep = verify_against_target(realize(alpha0_exclusion_factor(), d), 3)
        assert rep.passed
        assert rep.max_deviation <= 1e-12
        assert (0,) * (d - 1) + (1,) in rep.classes

    def test_verification_radius(self, exclusion2):
        with pytest.raises(LatticeError):
            verify_against_target(exclusion2, 1)

    @given(st.lists(st.integers(-4, 4), min_size=2, max_size=2))
    def test_symmetric_in_displacement(self, x):
        proc = realize(alpha0_exclusion_factor(), 2)
        a = exact_pair_expectation(proc, (0, 0), x)
        b = exact_pair_expectation(proc, (0, 0), [-c for c in x])
        c = exact_pair_expectation(proc, (0, 0), list(reversed(x)))
        assert a == b == c


class TestSampling:

    def test_exclusion_field(self, exclusion2):
        sample = sample_box(exclusion2, BoxRegion((20, 30)), 4)
        v = sample.values
        assert v.shape == (20, 30)
        assert not np.any(v[:-1, :] & v[1:, :])
        assert not np.any(v[:, :-1] & v[:, 1:])

    def test_reproducible(self, exclusion2):
        a = sample_box(exclusion2, BoxRegion((12, 12)), 99).values
        b = sample_box(exclusion2, BoxRegion((12, 12)), 99).values
        c = sample_box(exclusion2, BoxRegion((12, 12)), 100).values
        npt.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_box_dimension(self, exclusion2):
        with pytest.raises(DimensionMismatch):
            sample_box(exclusion2, BoxRegion((4, 4, 4)), 0)

    def test_full_lattice(self):
        proc = realize(constant_process(1.0), 3)
        assert sample_box(proc, BoxRegion((3, 4, 5)), 1).values.all()


class TestFieldText:

    def test_roundtrip(self, exclusion2):
        sample = sample_box(exclusion2, BoxRegion((5, 7)), 3)
        text = field_to_text(sample, header=["seed: 3"])
        assert text.startswith("# seed: 3\n2 5 7\n")
        back = field_from_text(text)
        npt.assert_array_equal(back.values, sample.values)
        assert back.box.side_lengths == (5, 7)

    def test_three_dimensional_rows(self):
        proc = realize(alpha0_exclusion_factor(), 3)
        sample = sample_box(proc, BoxRegion((2, 3, 4)), 5)
        text = field_to_text(sample)
        assert len(text.splitlines()) == 1 + 6
        npt.assert_array_equal(field_from_text(text).values, sample.values)

    @pytest.mark.parametrize("text", [
        "",
        "2 3\n010\n",
        "2 2 3\n010\n",
        "2 2 3\n010\n0120\n",
        "2 2 3\n010\n01x\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(RecordParseError):
            field_from_text(text)

    def test_shape_check(self):
        with pytest.raises(LatticeError):
            FieldSample(BoxRegion((2, 2)), np.zeros((2, 3)))


@pytest.mark.slow
def test_site_marginals_translation_invariant(exclusion2):
    replicas = 200
    fields = np.stack([sample_box(exclusion2, BoxRegion((16, 16)), s).values for s in range(replicas)])
    rho = exclusion2.rho
    z = (fields.mean(axis=0) - rho) / np.sqrt(rho * (1 - rho) / replicas)
    assert np.abs(z).max() < 5
