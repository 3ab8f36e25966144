"""Unit tests for collision summaries, moment laws, the matrix oracle and KS distances."""

import math
import pytest
import sys
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from noncollide.analysis import (
    calibrate_offdiagonal,
    collision_report,
    dyson_rate,
    generator_estimate,
    gronwall_bound,
    ks_distance,
    ks_pvalue,
    matrix_oracle,
    moment_report,
    predict_mean,
    scheme_difference,
    self_convergence,
)
from noncollide.coefficients import BetaWishartAbs, Custom, DysonCepa, Hyperbolic, NearestNeighbor, build_preset, build_system
from noncollide.errors import UnsupportedPresetError
from noncollide.integrate import StepControl, Trajectory, simulate_ensemble


def make_trajectory(states, dt=0.1):
    states = np.asarray(states, dtype=float)
    return Trajectory(times=np.arange(states.shape[0]) * dt, states=states, dt=dt, scheme="Hybrid")


class TestCollisionReport:
    """Test gap summaries of single trajectories."""

    @pytest.mark.unit
    def test_diffraction_from_collision(self):
        traj = make_trajectory([[0.0, 0.0, 0.0], [-0.01, 0.0, 0.02], [-0.3, 0.1, 0.4]])

        report = collision_report(traj, eps=0.05, tol=1e-12)

        assert report.diffraction_time == pytest.approx(0.2)
        assert not report.collision_flag
        np.testing.assert_allclose(report.min_gap_series, [0.0, 0.01, 0.3])
        assert report.V_N_series[0] == 0.0

    @pytest.mark.unit
    def test_never_separates(self):
        traj = make_trajectory([[0.0, 0.0], [0.0, 0.001]])

        report = collision_report(traj, eps=0.05, tol=1e-12)

        assert report.diffraction_time is None

    @pytest.mark.unit
    def test_collision_after_start(self):
        traj = make_trajectory([[0.0, 1.0], [0.5, 0.5], [0.2, 0.9]])

        assert collision_report(traj, eps=0.05, tol=1e-12).collision_flag

    @pytest.mark.unit
    def test_degenerate_exit(self):
        """Two particles start on the point 0 and leave it at the third sample."""
        traj = make_trajectory([[0.0, 0.0, 1.0], [0.0, 0.01, 1.0], [0.0, 0.2, 1.1]])

        report = collision_report(traj, eps=0.05, tol=1e-12, degenerate=[0.0, 1.0])

        assert len(report.degenerate_exits) == 1
        exit_ = report.degenerate_exits[0]
        assert exit_.point == 0.0
        assert exit_.cluster_size == 2
        assert exit_.exit_time == pytest.approx(0.2)

    @pytest.mark.unit
    def test_empty_trajectory(self):
        traj = Trajectory(times=np.zeros(0), states=np.zeros((0, 2)), dt=0.1, scheme="Direct")

        with pytest.raises(ValueError):
            collision_report(traj, eps=0.05, tol=1e-12)


class TestMomentLaws:
    """Test closed-form mean predictions."""

    @pytest.mark.unit
    def test_dyson_rate(self):
        """p = 4, gamma = 1: d/dt E[R] = 4 + 12 = 16."""
        assert dyson_rate(4, 1.0) == 16.0
        cs = build_preset(DysonCepa(gamma=1.0), 4)

        assert predict_mean(cs, "R", np.zeros(4), 1.0) == pytest.approx(16.0)
        assert predict_mean(cs, "R", np.array([-1.0, 0.0, 0.0, 1.0]), 0.5) == pytest.approx(10.0)

    @pytest.mark.unit
    def test_wishart_trace(self, wishart3):
        """beta p alpha = 9."""
        assert predict_mean(wishart3, "e1", np.zeros(3), 1.0) == pytest.approx(9.0)

    @pytest.mark.unit
    def test_wishart_second_moment(self, wishart3):
        """k = 4 + 2 beta alpha + 2 beta (p - 1) = 14, so E[R](1) = 14 * 9 / 2."""
        assert predict_mean(wishart3, "R", np.zeros(3), 1.0) == pytest.approx(63.0)

    @pytest.mark.unit
    def test_nearest_neighbor_rate(self):
        cs = build_preset(NearestNeighbor(gamma=1.0), 4)

        assert predict_mean(cs, "R", np.zeros(4), 1.0) == pytest.approx(4.0 + 2.0 * 3.0)

    @pytest.mark.unit
    def test_jacobi_relaxes_to_mean(self, jacobi3):
        """m = p q / (q + r) = 1.5."""
        assert predict_mean(jacobi3, "e1", np.array([0.2, 0.5, 0.8]), 0.0) == pytest.approx(1.5)
        assert predict_mean(jacobi3, "e1", np.zeros(3), 1.0) == pytest.approx(1.5 * (1 - math.exp(-6.0)))
        assert predict_mean(jacobi3, "e1", np.zeros(3), 50.0) == pytest.approx(1.5)

    @pytest.mark.unit
    def test_wishart_abs_trace(self):
        cs = build_preset(BetaWishartAbs(alpha=2.0, beta=2.0), 3)

        assert predict_mean(cs, "e1", np.array([-1.0, 0.0, 1.0]), 0.5) == pytest.approx(6.0)

    @pytest.mark.unit
    def test_unsupported(self):
        with pytest.raises(UnsupportedPresetError):
            predict_mean(build_preset(Hyperbolic(gamma=1.0), 3), "R", np.zeros(3), 1.0)
        with pytest.raises(UnsupportedPresetError):
            predict_mean(build_preset(DysonCepa(gamma=1.0, sigma="2"), 3), "R", np.zeros(3), 1.0)
        with pytest.raises(UnsupportedPresetError):
            predict_mean(build_system(Custom(sigma="1", H="1"), 3), "R", np.zeros(3), 1.0)

    @pytest.mark.unit
    def test_gronwall_bound(self):
        assert gronwall_bound(0.0, 1.0, 2, 0.0) == 0.0
        assert gronwall_bound(1.0, 0.5, 2, 1.0) == pytest.approx(2.0 * math.exp(2.0) - 1.0)

    @pytest.mark.unit
    def test_moment_report_on_small_ensemble(self, dyson3):
        ctl = StepControl(dt_base=1e-3, sample_every=50)
        stats = simulate_ensemble(dyson3, np.zeros(3), 0.2, ctl, n_paths=200, base_seed=5, workers=1)

        report = moment_report(stats, dyson3, 0.2, growth_constant=1.0)

        assert report.observable == "R"
        assert report.predicted == pytest.approx(9.0 * 0.2)
        assert report.n_paths == 200
        assert report.within(5.0)
        assert report.bound >= report.predicted


class TestMatrixOracle:
    """Test the Brownian-matrix eigenvalue sampler."""

    @pytest.mark.unit
    def test_calibration(self):
        """Off-diagonal variance beta / 2 per unit time."""
        assert calibrate_offdiagonal(1, 3) == pytest.approx(0.5)
        assert calibrate_offdiagonal(2, 3) == pytest.approx(1.0)
        assert calibrate_offdiagonal(2, 1) == 0.0

    @pytest.mark.unit
    def test_time_zero(self):
        sample = matrix_oracle(2, 3, 0.0, 10, seed=1)

        np.testing.assert_array_equal(sample.samples, np.zeros((10, 3)))

    @pytest.mark.unit
    @pytest.mark.parametrize("beta", [1, 2])
    def test_trace_of_square(self, beta):
        """E[sum lambda^2] at t = 1 equals the Dyson rate with gamma = beta / 2."""
        sample = matrix_oracle(beta, 3, 1.0, 20_000, seed=2)

        R = (sample.samples ** 2).sum(axis=1)

        assert R.mean() == pytest.approx(dyson_rate(3, beta / 2.0), rel=0.03)
        assert np.all(np.diff(sample.samples, axis=1) >= 0)
        assert sample.pooled().shape == (60_000,)

    @pytest.mark.unit
    def test_reproducible(self):
        a = matrix_oracle(1, 4, 0.5, 50, seed=9)
        b = matrix_oracle(1, 4, 0.5, 50, seed=9)

        np.testing.assert_array_equal(a.samples, b.samples)

    @pytest.mark.unit
    def test_rejects_other_beta(self):
        with pytest.raises(ValueError):
            matrix_oracle(4, 3, 1.0, 10, seed=1)


class TestKolmogorovSmirnov:
    """Test the two-sample distance."""

    @pytest.mark.unit
    def test_small_example(self):
        assert ks_distance([1.0, 2.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0 / 3.0)

    @pytest.mark.unit
    def test_identical_and_disjoint(self):
        assert ks_distance([0.1, 0.5, 0.9], [0.9, 0.1, 0.5]) == 0.0
        assert ks_distance([0.0, 1.0], [2.0, 3.0]) == 1.0

    @pytest.mark.unit
    def test_empty_sample(self):
        with pytest.raises(ValueError):
            ks_distance([], [1.0])

    @pytest.mark.unit
    def test_agrees_with_scipy_statistic(self):
        rng = np.random.default_rng(4)
        a, b = rng.standard_normal(300), rng.standard_normal(200) + 0.2

        from scipy import stats

        assert ks_distance(a, b) == pytest.approx(stats.ks_2samp(a, b).statistic)
        assert 0.0 <= ks_pvalue(a, b) <= 1.0


class TestGeneratorAndSchemes:
    """Test the one-step generator estimate and cross-scheme differences."""

    @pytest.mark.unit
    def test_generator_estimate_two_particles(self, dyson2):
        """D_1 = 2 + 4 gamma = 6."""
        est = generator_estimate(dyson2, np.array([-0.5, 0.5]), 1e-5, 20_000, seed=1)

        assert est.predicted == pytest.approx([6.0])
        assert est.relative_error[0] < 0.05

    @pytest.mark.unit
    def test_scheme_difference_shrinks(self, dyson3):
        coarse = scheme_difference(dyson3, np.array([-1.0, 0.0, 1.0]), 0.1, 1e-3, 4, n_paths=10, seed=3)
        fine = scheme_difference(dyson3, np.array([-1.0, 0.0, 1.0]), 0.1, 1e-3, 1, n_paths=10, seed=3)

        assert 0.0 < fine < coarse

    @pytest.mark.unit
    def test_self_convergence_error_shrinks(self, dyson3):
        ratio = self_convergence(dyson3, np.array([-1.0, 0.0, 1.0]), 0.1, 1e-3, 4, n_paths=20, seed=3)

        assert ratio > 1.0

    @pytest.mark.unit
    @pytest.mark.parametrize("coarsen", [0, 2, 6])
    def test_self_convergence_needs_four_levels(self, dyson3, coarsen):
        with pytest.raises(ValueError):
            self_convergence(dyson3, np.array([-1.0, 0.0, 1.0]), 0.1, 1e-3, coarsen, n_paths=2, seed=3)

    @pytest.mark.benchmark
    def test_self_convergence_strong_order(self, dyson3):
        """Halving dt shrinks the sup-path error by sqrt(2) to 2."""
        # Arrange
        x0 = np.array([-1.0, 0.0, 1.0])

        # Act
        ratio = self_convergence(dyson3, x0, 1.0, 1e-3, 4, n_paths=100, seed=17)

        # Assert
        assert 1.2 <= ratio <= 2.8
