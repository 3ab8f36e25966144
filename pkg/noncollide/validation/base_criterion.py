"""Base criterion class with shared functionality for all acceptance criteria."""

import logging
from abc import ABC, abstractmethod
from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


class CriterionResult(BaseModel):
    """One scorecard row."""

    criterion_id: str
    name: str
    observed: Any = None
    expected: Any = None
    tolerance: Any = None
    passed: bool = False
    runtime: float = 0.0
    details: Dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None


class BaseCriterion(ABC):
    """Abstract base class for acceptance criteria.

    Subclasses implement ``evaluate``; ``process`` wraps it as a workflow
    node that times the run and turns any failure into a failed row.
    """

    criterion_id: str = ""
    name: str = ""

    def __init__(self, full: bool = False):
        """Initialize criterion.

        Args:
            full: Run at the documented full scale instead of the quick one
        """
        self.full = full
        self.logger = logging.getLogger(f"noncollide.validation.{self.criterion_id}")
        self.last_execution_time = 0.0
        self.errors: List[Dict[str, Any]] = []

    @abstractmethod
    def evaluate(self, seed: int) -> CriterionResult:
        """Run the check and fill observed, expected, tolerance and passed.

        Args:
            seed: Base seed of the suite

        Returns:
            CriterionResult (runtime is filled in by process)
        """

    def result(self, **fields: Any) -> CriterionResult:
        return CriterionResult(criterion_id=self.criterion_id, name=self.name, **fields)

    def process(self, state: Dict[str, Any]) -> Dict[str, Any]:
        """Workflow node: evaluate and append the row to the state.

        Errors logged during the run are listed under details["errors"].
        """
        start_time = datetime.now()
        self.errors = []
        self.log_info(f"Running ({'full' if self.full else 'quick'} scale)")
        try:
            row = self.evaluate(state["seed"])
        except Exception as e:
            self.log_error("Criterion raised", e)
            row = self.result(passed=False, error=f"{type(e).__name__}: {e}")
        if self.errors:
            row.details["errors"] = list(self.errors)
        row.runtime = self.track_execution_time(start_time)
        if row.passed:
            self.log_info(f"PASS observed={row.observed} expected={row.expected}")
        else:
            self.log_warning(f"FAIL observed={row.observed} expected={row.expected}")
        return {"results": [row]}

    def log_info(self, message: str):
        """Log info message with criterion id prefix."""
        self.logger.info(f"[{self.criterion_id}] {message}")

    def log_error(self, message: str, error: Optional[Exception] = None):
        """Log error message and track it.

        Args:
            message: Error message
            error: Optional exception object
        """
        error_msg = f"[{self.criterion_id}] ERROR: {message}"
        if error:
            error_msg += f" - {str(error)}"

        self.logger.error(error_msg)
        self.errors.append({
            "timestamp": datetime.now().isoformat(),
            "message": message,
            "error": str(error) if error else None
        })

    def log_warning(self, message: str):
        """Log warning message."""
        self.logger.warning(f"[{self.criterion_id}] WARNING: {message}")

    def track_execution_time(self, start_time: datetime) -> float:
        """Record and return the seconds elapsed since start_time."""
        elapsed = (datetime.now() - start_time).total_seconds()
        self.last_execution_time = elapsed
        self.log_info(f"Execution time: {elapsed:.2f}s")
        return elapsed

    def __repr__(self) -> str:
        return f"{type(self).__name__}(id={self.criterion_id}, full={self.full})"
