import numpy.testing as npt
import pytest

from src.basic1d import alpha0_exclusion_factor, constant_process
from src.errors import DegenerateEstimate, DimensionMismatch, LatticeError
from src.lattice_core import BoxRegion, RadialSpec
from src.montecarlo import (
    consistency_test, displacement_classes, estimate, estimate_table, thinning_check, write_estimate,
)
from src.product_nd import realize


@pytest.fixture
def exclusion2():
    return realize(alpha0_exclusion_factor(), 2)


def test_displacement_classes():
    classes = displacement_classes(2, 1)
    assert list(classes) == [(0, 0), (0, 1), (1, 1)]
    assert [len(v) for v in classes.values()] == [1, 4, 4]
    assert sum(len(v) for v in displacement_classes(3, 2).values()) == 125


class TestEstimate:

    def test_small_run(self, exclusion2):
        est = estimate(exclusion2, BoxRegion((16, 16)), 2, 8, seed=1)
        assert est.core_box.side_lengths == (12, 12)
        assert est.rho_hat.target == pytest.approx(1 / 16)
        nn = next(c for c in est.classes if c.label == "0,1")
        # exclusion: neighbours are never both occupied
        assert nn.estimate == 0.0 and nn.std_error == 0.0
        assert nn.z == 0.0 and not nn.degenerate

    def test_seed_reproducible(self, exclusion2):
        a = estimate(exclusion2, BoxRegion((12, 12)), 1, 4, seed=3)
        b = estimate(exclusion2, BoxRegion((12, 12)), 1, 4, seed=3, n_jobs=2)
        npt.assert_array_equal(estimate_table(a)["estimate"], estimate_table(b)["estimate"])

    def test_thinning_by_one_is_identity(self, exclusion2):
        a = estimate(exclusion2, BoxRegion((12, 12)), 1, 4, seed=8)
        b = estimate(exclusion2, BoxRegion((12, 12)), 1, 4, seed=8, thin=1.0)
        npt.assert_array_equal(estimate_table(a)["estimate"], estimate_table(b)["estimate"])

    def test_validation(self, exclusion2):
        with pytest.raises(LatticeError):
            estimate(exclusion2, BoxRegion((12, 12)), 1, 1, seed=0)
        with pytest.raises(DimensionMismatch):
            estimate(exclusion2, BoxRegion((12, 12, 12)), 1, 4, seed=0)
        with pytest.raises(LatticeError):
            estimate(exclusion2, BoxRegion((4, 4)), 2, 4, seed=0)
        with pytest.raises(LatticeError):
            estimate(exclusion2, BoxRegion((12, 12)), 1, 4, seed=0, thin=1.5)

    def test_full_lattice_is_degenerate(self):
        proc = realize(constant_process(1.0), 2)
        est = estimate(proc, BoxRegion((8, 8)), 1, 3, seed=0)
        assert est.degenerate
        with pytest.raises(DegenerateEstimate):
            consistency_test(est, proc.target)

    def test_mismatch_with_zero_scatter_fails(self, exclusion2):
        est = estimate(exclusion2, BoxRegion((16, 16)), 1, 6, seed=2)
        report = consistency_test(est, RadialSpec(0.5, exclusion2.rho, 2))
        assert not report.passed
        assert "0,1" in report.degenerate_failures

    def test_spec_dimension(self, exclusion2):
        est = estimate(exclusion2, BoxRegion((10, 10)), 1, 3, seed=2)
        with pytest.raises(DimensionMismatch):
            consistency_test(est, RadialSpec(0.0, 0.1, 3))


class TestOutput:

    def test_table_columns(self, exclusion2):
        est = estimate(exclusion2, BoxRegion((10, 10)), 1, 3, seed=5)
        table = estimate_table(est)
        assert list(table.columns) == ["class", "displacement", "estimate", "std_error", "target", "z"]
        assert table["class"].iloc[0] == "rho"
        assert len(table) == 1 + 3

    def test_write_with_header(self, exclusion2, tmp_path):
        est = estimate(exclusion2, BoxRegion((10, 10)), 1, 3, seed=5)
        path = tmp_path / "est.csv"
        write_estimate(est, str(path), header=["seed: 5"])
        lines = path.read_text().splitlines()
        assert lines[0] == "# seed: 5"
        assert lines[1] == "class,displacement,estimate,std_error,target,z"


@pytest.mark.slow
class TestAcceptance:

    def test_exclusion_product_consistent(self, exclusion2):
        est = estimate(exclusion2, BoxRegion((64, 64)), 3, 200, seed=20240601)
        report = consistency_test(est, exclusion2.target, 4.0)
        assert report.passed, report.worst
        assert report.tests == 1 + len(displacement_classes(2, 3))
        assert abs(est.rho_hat.estimate - 1 / 16) <= 4 * est.rho_hat.std_error

    def test_unbiased_on_small_box(self, exclusion2):
        est = estimate(exclusion2, BoxRegion((16, 16)), 2, 1000, seed=31)
        report = consistency_test(est, exclusion2.target, 5.0)
        assert report.passed, report.worst

    def test_thinning_keeps_g(self, exclusion2):
        rep = thinning_check(exclusion2, 0.5, BoxRegion((64, 64)), 3, 200, seed=7)
        assert rep.spec.rho == pytest.approx(1 / 32)
        assert rep.spec.alpha == exclusion2.alpha
        assert rep.passed

    def test_thinning_to_nothing(self, exclusion2):
        rep = thinning_check(exclusion2, 0.0, BoxRegion((16, 16)), 1, 4, seed=7)
        assert rep.degenerate
        assert rep.passed
