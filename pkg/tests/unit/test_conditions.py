"""Unit tests for the well-posedness condition checks."""

import pytest
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from noncollide.coefficients import (
    BetaWishart,
    BetaWishartAbs,
    Custom,
    DysonCepa,
    Hyperbolic,
    Jacobi,
    NearestNeighbor,
    build_preset,
    build_system,
)
from noncollide.conditions import (
    check_numeric,
    check_preset,
    degenerate_points,
    evaluate_witness,
    explore_nearest_neighbor,
    nn_conjectured_threshold,
)


class TestClosedFormThresholds:
    """Test exact verdicts of the preset families."""

    @pytest.mark.unit
    def test_dyson_passes(self, dyson3):
        report = check_preset(dyson3)

        assert report.status == "pass"
        assert report.exit_code == 0
        assert report.method == "closed_form"
        assert report.failed() == []

    @pytest.mark.unit
    def test_dyson_below_threshold_fails_a2(self):
        """sup sigma^2 = 1 > 2 gamma = 0.8."""
        # Arrange
        cs = build_preset(DysonCepa(gamma=0.4), 3)

        # Act
        report = check_preset(cs)

        # Assert
        assert report.status == "fail"
        assert report.exit_code == 1
        assert report.failed() == ["A2"]
        witness = report.witnesses["A2"][0]
        assert witness.form == "a2"
        assert witness.lhs == pytest.approx(2.0)
        assert witness.rhs == pytest.approx(1.6)
        assert witness.violated()

    @pytest.mark.unit
    @pytest.mark.parametrize("gamma,status", [(0.5, "pass"), (0.5 - 1e-9, "fail")])
    def test_dyson_boundary(self, gamma, status):
        assert check_preset(build_preset(DysonCepa(gamma=gamma), 4)).status == status

    @pytest.mark.unit
    def test_wishart_small_alpha_fails_a4_and_domain(self):
        # Arrange
        cs = build_preset(BetaWishart(alpha=1.0, beta=1.0), 3)

        # Act
        report = check_preset(cs)

        # Assert
        assert set(report.failed()) == {"A4", "domain"}
        witness = report.witnesses["A4"][0]
        assert witness.relation == "ne0"
        assert witness.lhs == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.unit
    def test_wishart_at_threshold_passes(self):
        report = check_preset(build_preset(BetaWishart(alpha=2.0, beta=1.0), 3))

        assert report.status == "pass"
        assert report.verdicts["domain"] == "pass"

    @pytest.mark.unit
    def test_wishart_weak_repulsion_fails_a2(self):
        report = check_preset(build_preset(BetaWishart(alpha=5.0, beta=0.9), 3))

        assert report.failed() == ["A2"]

    @pytest.mark.unit
    def test_wishart_abs_negative_integer_alpha(self):
        """Integer alpha with |alpha| <= p-2 leaves a cancelling configuration."""
        report = check_preset(build_preset(BetaWishartAbs(alpha=-1.0, beta=1.0), 3))

        assert "A4" in report.failed()

    @pytest.mark.unit
    def test_jacobi(self):
        assert check_preset(build_preset(Jacobi(q=2.0, r=2.0, beta=1.0), 3)).status == "pass"

        report = check_preset(build_preset(Jacobi(q=1.5, r=3.0, beta=1.0), 3))
        assert report.failed() == ["domain"]

    @pytest.mark.unit
    def test_witness_reevaluates(self):
        # Arrange
        cs = build_preset(DysonCepa(gamma=0.3), 2)
        witness = check_preset(cs).witnesses["A2"][0]

        # Act
        lhs, rhs = evaluate_witness(cs, witness)

        # Assert
        assert (lhs, rhs) == pytest.approx((witness.lhs, witness.rhs))

    @pytest.mark.unit
    def test_growth_constant_reported(self, wishart3):
        report = check_preset(wishart3)

        assert report.constants["C2_c"] == pytest.approx(5.0)


class TestNearestNeighbor:
    """Test the nearest-neighbour family."""

    @pytest.mark.unit
    def test_threshold_value(self):
        assert nn_conjectured_threshold(3) == pytest.approx(0.75)
        assert nn_conjectured_threshold(4) > 0.75

    @pytest.mark.unit
    def test_p3_sharp_rule(self, nearest3):
        assert check_preset(nearest3).status == "pass"

        report = check_preset(build_preset(NearestNeighbor(gamma=0.74), 3))

        assert set(report.failed()) == {"A2", "A3"}
        witness = report.witnesses["A2"][0]
        assert witness.form == "log_vandermonde"
        # (9 - 12 gamma) / 4 at equal unit gaps
        assert witness.lhs == pytest.approx((9.0 - 12.0 * 0.74) / 4.0)

    @pytest.mark.unit
    def test_p4_is_a_conjecture(self):
        report = check_preset(build_preset(NearestNeighbor(gamma=2.0), 4))

        assert report.status == "unknown"
        assert report.exit_code == 2
        assert report.methods["A2"] == "conjecture"
        assert report.info["meets_conjectured_threshold"] is True

    @pytest.mark.unit
    def test_exploration(self):
        above = explore_nearest_neighbor(3, 0.75, n=2000, seed=3)
        below = explore_nearest_neighbor(3, 0.5, n=2000, seed=3)

        assert above.nonpositive
        assert above.max_normalized_drift <= 1e-12
        assert not below.nonpositive
        assert len(below.worst_point) == 3


class TestSampledChecks:
    """Test grid-sampled verdicts for user systems."""

    @pytest.mark.unit
    def test_custom_dyson_passes(self):
        # Arrange
        cs = build_system(Custom(sigma="1", H="1"), 3)

        # Act
        report = check_preset(cs)

        # Assert
        assert report.method == "sampled"
        assert report.status == "pass"

    @pytest.mark.unit
    def test_custom_strong_noise_fails_on_diagonal(self):
        # Arrange
        cs = build_system(Custom(sigma="2", H="1"), 3)

        # Act
        report = check_numeric(cs)

        # Assert
        assert "A2" in report.failed()
        assert report.witnesses["A2"][0].point["x"] == report.witnesses["A2"][0].point["y"]

    @pytest.mark.unit
    def test_negative_kernel_breaks_symmetry_check(self):
        # Arrange
        cs = build_system(Custom(sigma="1", H="-1"), 2)

        # Act
        report = check_numeric(cs)

        # Assert
        assert "symmetry" in report.failed()

    @pytest.mark.unit
    @pytest.mark.parametrize("params", [
        DysonCepa(gamma=1.0),
        DysonCepa(gamma=0.4),
        BetaWishart(alpha=3.0, beta=1.0),
        BetaWishart(alpha=3.0, beta=0.5),
        Jacobi(q=3.0, r=3.0, beta=1.0),
        NearestNeighbor(gamma=1.0),
        NearestNeighbor(gamma=0.5),
        Hyperbolic(gamma=1.0),
    ], ids=lambda params: f"{params.kind}-{params.model_dump(exclude={'kind'}, exclude_none=True)}")
    def test_sampling_agrees_with_closed_form(self, params):
        """Grid sampling reaches the closed-form verdict wherever both decide."""
        # Arrange
        cs = build_preset(params, 3)

        # Act
        exact = check_preset(cs)
        sampled = check_numeric(cs, grid_n=32, tol=1e-9)

        # Assert
        decided = [cid for cid, verdict in exact.verdicts.items()
                   if verdict != "unknown" and sampled.verdicts.get(cid, "unknown") != "unknown"]
        assert "A2" in decided
        assert {cid: sampled.verdicts[cid] for cid in decided} == {cid: exact.verdicts[cid] for cid in decided}

    @pytest.mark.unit
    def test_box_must_lie_in_domain(self, wishart3):
        with pytest.raises(ValueError):
            check_numeric(wishart3, box=(-1.0, 1.0))

    @pytest.mark.unit
    def test_grid_too_coarse(self, dyson3):
        with pytest.raises(ValueError):
            check_numeric(dyson3, grid_n=3)


class TestDegeneratePoints:
    """Test the search for points where noise and self-interaction vanish."""

    @pytest.mark.unit
    def test_presets_are_exact(self, wishart3, jacobi3, dyson3):
        assert degenerate_points(wishart3).points == [0.0]
        assert degenerate_points(jacobi3).points == [0.0, 1.0]
        assert degenerate_points(dyson3).points == []

    @pytest.mark.unit
    def test_sampled_isolated_zero(self):
        # Arrange
        cs = build_system(Custom(sigma="x", H="(x*y)^2"), 2)

        # Act
        found = degenerate_points(cs)

        # Assert
        assert found.method == "sampled"
        assert found.isolated
        assert found.points == pytest.approx([0.0], abs=1e-6)
