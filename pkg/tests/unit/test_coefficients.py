"""Unit tests for coefficient sets, presets and the expression grammar."""

import pickle
import pytest
import sys
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from noncollide.coefficients import (
    BetaFamily,
    BetaWishartAbs,
    Custom,
    DysonCepa,
    GeneralPsi,
    Hyperbolic,
    PsiDescriptor,
    build_preset,
    build_system,
    singular_drift,
    singular_drift_all,
)
from noncollide.errors import SingularityError, UnsupportedPresetError
from noncollide.utils.expressions import parse_field, parse_kernel


class TestExpressions:
    """Test the coefficient expression grammar."""

    @pytest.mark.unit
    def test_field_arithmetic_and_functions(self):
        """Fields support operators, absolute value bars and the function table."""
        # Arrange
        f = parse_field("2*sqrt(|x|) + max(x, 0)^2 - min(x, 1)")

        # Act
        values = f(np.array([-4.0, 0.0, 2.0]))

        # Assert
        np.testing.assert_allclose(values, [4.0 + 0.0 + 4.0, 0.0, 2 * np.sqrt(2) + 4.0 - 1.0])

    @pytest.mark.unit
    def test_xcoth_is_continuous_at_zero(self):
        """u coth u is extended by 1 at u = 0."""
        f = parse_field("xcoth(x)")

        assert f(0.0) == pytest.approx(1.0)
        assert f(1e-9) == pytest.approx(1.0)
        assert f(2.0) == pytest.approx(2.0 / np.tanh(2.0))

    @pytest.mark.unit
    def test_kernel_takes_two_variables_and_constants(self):
        """Kernels see x, y and named constants."""
        k = parse_kernel("beta*(x + y) + pi", {"beta": 2.0})

        assert k(1.0, 2.0) == pytest.approx(6.0 + np.pi)

    @pytest.mark.unit
    def test_unknown_name_is_rejected(self):
        """Names that are neither variables nor constants fail at compile time."""
        with pytest.raises(ValueError, match="unknown name"):
            parse_field("x + y")

    @pytest.mark.unit
    def test_wrong_arity_is_rejected(self):
        with pytest.raises(ValueError):
            parse_field("max(x)")

    @pytest.mark.unit
    def test_syntax_error_is_rejected(self):
        with pytest.raises(ValueError, match="cannot parse"):
            parse_field("2 * (x")

    @pytest.mark.unit
    def test_expressions_pickle(self):
        """Compiled expressions cross process boundaries."""
        # Arrange
        f = parse_field("gamma*x", {"gamma": 3.0})

        # Act
        clone = pickle.loads(pickle.dumps(f))

        # Assert
        assert clone(2.0) == pytest.approx(6.0)


class TestPresets:
    """Test preset construction and coefficient evaluation."""

    @pytest.mark.unit
    def test_dyson_kernel_matrix(self, dyson3):
        """Constant kernel off the diagonal, zero on it."""
        K = dyson3.kernel_matrix(np.array([-1.0, 0.0, 1.0]))

        expected = np.ones((3, 3)) - np.eye(3)
        np.testing.assert_allclose(K, expected)
        assert dyson3.kind == "dyson"
        assert dyson3.domain == "real"

    @pytest.mark.unit
    def test_nearest_neighbor_only_neighbours_interact(self, nearest3):
        K = nearest3.kernel_matrix(np.array([0.0, 1.0, 2.0]))

        assert K[0, 1] == pytest.approx(0.75)
        assert K[1, 2] == pytest.approx(0.75)
        assert K[0, 2] == 0.0
        assert not nearest3.active_pairs()[0, 2]

    @pytest.mark.unit
    def test_jacobi_fields_and_kernel(self, jacobi3):
        # Arrange
        x = np.array([0.2, 0.5, 0.7])

        # Act
        sigma = jacobi3.sigma_values(x)
        b = jacobi3.drift_values(x)
        K = jacobi3.kernel_matrix(x)

        # Assert
        np.testing.assert_allclose(sigma, 2 * np.sqrt(x * (1 - x)))
        np.testing.assert_allclose(b, 3.0 - 6.0 * x)
        assert K[0, 2] == pytest.approx(0.2 * 0.3 + 0.7 * 0.8)
        assert jacobi3.domain == "unit_interval"

    @pytest.mark.unit
    def test_wishart_clamp_projects_onto_half_line(self, wishart3):
        clamped, moved = wishart3.clamp(np.array([[-0.1, 0.5, 1.0], [0.0, 0.5, 1.0]]))

        np.testing.assert_allclose(clamped[0], [0.0, 0.5, 1.0])
        assert moved.tolist() == [True, False]

    @pytest.mark.unit
    def test_real_line_clamp_is_identity(self, dyson3):
        # Arrange
        x = np.array([-5.0, 0.0, 5.0])

        # Act
        clamped, moved = dyson3.clamp(x)

        # Assert
        assert clamped is x
        assert not moved

    @pytest.mark.unit
    def test_hyperbolic_and_general_psi_coth_agree(self):
        """H = gamma xcoth(x - y) for both spellings of the coth profile."""
        hyper = build_preset(Hyperbolic(gamma=0.7), 3)
        psi = build_preset(GeneralPsi(gamma=0.7, psi=PsiDescriptor(kind="coth", scale=1.0)), 3)
        x = np.array([-0.4, 0.1, 1.3])

        np.testing.assert_allclose(hyper.kernel_matrix(x), psi.kernel_matrix(x))

    @pytest.mark.unit
    def test_beta_family_matches_wishart_fields(self):
        """g = sqrt(x), h = 1 gives the Wishart diffusion and kernel."""
        family = build_preset(BetaFamily(g="sqrt(x)", h="1", b="3", beta=1.0, domain="half_line"), 3)
        x = np.array([0.5, 1.0, 2.0])

        np.testing.assert_allclose(family.sigma_values(x), 2 * np.sqrt(x))
        assert family.kernel_matrix(x)[0, 2] == pytest.approx(2.5)
        np.testing.assert_allclose(family.drift_values(x), 3.0)

    @pytest.mark.unit
    def test_sigma_override(self):
        cs = build_preset(BetaWishartAbs(alpha=1.0, beta=1.0, sigma="1"), 2)

        np.testing.assert_allclose(cs.sigma_values(np.array([-1.0, 4.0])), [1.0, 1.0])

    @pytest.mark.unit
    def test_single_particle_needs_allow_single(self):
        # Arrange
        with pytest.raises(ValueError):
            build_preset(DysonCepa(gamma=1.0), 1)

        # Act
        cs = build_preset(DysonCepa(gamma=1.0), 1, allow_single=True)

        # Assert
        assert cs.p == 1
        assert cs.H == {}

    @pytest.mark.unit
    def test_unknown_tag_is_unsupported(self):
        class Fake:
            kind = "not_a_preset"

        with pytest.raises(UnsupportedPresetError):
            build_preset(Fake(), 3)


class TestCustomSystems:
    """Test user systems built from expressions."""

    @pytest.mark.unit
    def test_per_particle_fields_and_pair_kernels(self):
        # Arrange
        params = Custom(sigma=["1", "2", "3"], b="-x", H={"1,3": "5"}, H_default="1")

        # Act
        cs = build_system(params, 3)
        x = np.array([0.0, 1.0, 2.0])

        # Assert
        assert cs.kind == "custom"
        np.testing.assert_allclose(cs.sigma_values(x), [1.0, 2.0, 3.0])
        np.testing.assert_allclose(cs.drift_values(x), -x)
        K = cs.kernel_matrix(x)
        assert K[0, 2] == K[2, 0] == pytest.approx(5.0)
        assert K[0, 1] == pytest.approx(1.0)

    @pytest.mark.unit
    def test_field_list_length_must_match_p(self):
        with pytest.raises(ValueError, match="sigma lists 2 fields"):
            build_system(Custom(sigma=["1", "1"], H="1"), 3)

    @pytest.mark.unit
    def test_bad_pair_key(self):
        with pytest.raises(ValueError, match="not a pair"):
            build_system(Custom(sigma="1", H={"1,1": "1"}), 3)

    @pytest.mark.unit
    def test_constants_reach_expressions(self):
        cs = build_system(Custom(sigma="s", H="g", constants={"s": 0.5, "g": 2.0}), 2)

        assert cs.sigma_values(np.array([0.0, 1.0]))[0] == pytest.approx(0.5)
        assert cs.kernel_matrix(np.array([0.0, 1.0]))[0, 1] == pytest.approx(2.0)


class TestSingularDrift:
    """Test the singular drift of the original system."""

    @pytest.mark.unit
    def test_dyson_two_particles(self, dyson2):
        drift = singular_drift_all(dyson2, np.array([0.0, 1.0]))

        np.testing.assert_allclose(drift, [-1.0, 1.0])
        assert singular_drift(dyson2, 1, [0.0, 1.0]) == pytest.approx(1.0)

    @pytest.mark.unit
    def test_batched_drift(self, dyson3):
        x = np.array([[-1.0, 0.0, 1.0], [0.0, 1.0, 3.0]])

        drift = singular_drift_all(dyson3, x)

        assert drift.shape == (2, 3)
        np.testing.assert_allclose(drift[0], [-1.5, 0.0, 1.5])
        # drift sums to zero for a constant kernel
        np.testing.assert_allclose(drift.sum(axis=1), 0.0, atol=1e-12)

    @pytest.mark.unit
    def test_collision_raises(self, dyson3):
        with pytest.raises(SingularityError) as excinfo:
            singular_drift_all(dyson3, np.array([0.0, 0.0, 1.0]))

        assert excinfo.value.pair == (0, 1)
        assert excinfo.value.gap == 0.0

    @pytest.mark.unit
    def test_nearest_neighbor_drift(self, nearest3):
        """The outer particles do not push each other."""
        drift = singular_drift_all(nearest3, np.array([0.0, 1.0, 2.0]))

        np.testing.assert_allclose(drift, [-0.75, 0.0, 0.75])
