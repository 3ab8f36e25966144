"""Integration tests for the acceptance-suite workflow."""

import json
import pytest
import sys
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from noncollide.integrate import StepControl, simulate_ensemble
from noncollide.validation.base_criterion import BaseCriterion
from noncollide.validation.criteria import CRITERIA
from noncollide.validation.workflow import ValidationWorkflow


class BrokenCriterion(BaseCriterion):
    criterion_id = "broken"
    name = "Always raises"

    def evaluate(self, seed):
        raise RuntimeError("boom")


class WarningCriterion(BaseCriterion):
    criterion_id = "warning"
    name = "Logs an error and passes"

    def evaluate(self, seed):
        self.log_error("step size too coarse", ValueError("dt"))
        return self.result(observed=seed, expected=seed, tolerance=0, passed=True)


class TestValidationWorkflow:
    """Test coordination of criteria in the workflow graph."""

    @pytest.mark.integration
    def test_criterion_ids_are_unique(self):
        ids = [c.criterion_id for c in CRITERIA]

        assert len(ids) == len(set(ids)) == 10

    @pytest.mark.integration
    def test_subset_runs_in_order(self):
        workflow = ValidationWorkflow(only=["thresholds", "roundtrip"])

        scorecard = workflow.run(seed=7)

        assert [r.criterion_id for r in scorecard.results] == ["roundtrip", "thresholds"]
        assert scorecard.scale == "quick"
        assert scorecard.seed == 7
        assert scorecard.passed
        assert scorecard.exit_code == 0

    @pytest.mark.integration
    def test_unknown_id(self):
        with pytest.raises(ValueError):
            ValidationWorkflow(only=["roundtrip", "nope"])

    @pytest.mark.integration
    def test_raising_criterion_becomes_failed_row(self):
        row = BrokenCriterion().process({"seed": 1})["results"][0]

        assert not row.passed
        assert row.error == "RuntimeError: boom"
        assert row.runtime >= 0.0
        assert row.details["errors"][0]["error"] == "boom"

    @pytest.mark.integration
    def test_logged_errors_reach_the_row(self):
        # Arrange
        criterion = WarningCriterion()

        # Act
        first = criterion.process({"seed": 1})["results"][0]
        second = criterion.process({"seed": 2})["results"][0]

        # Assert
        assert first.passed
        assert [e["message"] for e in first.details["errors"]] == ["step size too coarse"]
        assert len(second.details["errors"]) == 1

    @pytest.mark.integration
    def test_scorecard_file(self, tmp_path, assert_valid_json):
        scorecard = ValidationWorkflow(only=["log_vandermonde"]).run(seed=3)

        path = scorecard.write(tmp_path / "cards" / "scorecard.json")

        data = json.loads(path.read_text())
        assert_valid_json(data, ["scale", "seed", "started", "finished", "results", "passed"])
        assert data["results"][0]["criterion_id"] == "log_vandermonde"

    @pytest.mark.integration
    def test_ensemble_independent_of_workers(self, dyson3):
        """Chunks merge in a fixed order whatever the process count."""
        ctl = StepControl(dt_base=1e-3, sample_every=10)

        one = simulate_ensemble(dyson3, np.zeros(3), 0.05, ctl, n_paths=24, base_seed=4, workers=1, chunk_size=5)
        two = simulate_ensemble(dyson3, np.zeros(3), 0.05, ctl, n_paths=24, base_seed=4, workers=2, chunk_size=5)

        for key in one.mean:
            np.testing.assert_array_equal(one.mean[key], two.mean[key])
            np.testing.assert_array_equal(one.stderr[key], two.stderr[key])
        np.testing.assert_array_equal(one.final_states, two.final_states)


class TestFullAcceptanceSuite:
    """Every criterion at the documented sample sizes."""

    @pytest.mark.benchmark
    def test_full_scale(self, test_output_dir):
        scorecard = ValidationWorkflow(full=True).run(seed=20240917)
        scorecard.write(Path(test_output_dir) / "scorecard_full.json")

        failed = [r.criterion_id for r in scorecard.results if not r.passed]
        assert failed == []

    @pytest.mark.benchmark
    def test_quick_scale(self):
        scorecard = ValidationWorkflow().run(seed=20240917)

        assert len(scorecard.results) == 10
        assert scorecard.passed
