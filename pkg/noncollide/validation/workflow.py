"""Validation workflow - LangGraph orchestration of the acceptance suite."""

import json
import logging
import operator
from datetime import datetime
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Sequence, TypedDict, Union

from langgraph.graph import END, StateGraph
from langgraph.graph.state import CompiledStateGraph
from pydantic import BaseModel, computed_field

from noncollide.config import DEFAULT_SEED
from noncollide.output import to_plain
from noncollide.validation.base_criterion import BaseCriterion, CriterionResult
from noncollide.validation.criteria import CRITERIA

logger = logging.getLogger(__name__)


class ValidationState(TypedDict, total=False):
    """State schema for the validation graph."""
    seed: int
    results: Annotated[List[CriterionResult], operator.add]
    start_time: str


class Scorecard(BaseModel):
    """Every criterion exactly once, with the overall verdict."""

    scale: str
    seed: int
    started: str
    finished: str
    results: List[CriterionResult]

    @computed_field
    @property
    def passed(self) -> bool:
        return bool(self.results) and all(r.passed for r in self.results)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(to_plain(self.model_dump(mode="python")), f, indent=2)
            f.write("\n")
        return path


class ValidationWorkflow:
    """Runs the acceptance criteria one after another as a state graph."""

    def __init__(self, full: bool = False, only: Optional[Sequence[str]] = None):
        """Initialize workflow with criteria.

        Args:
            full: Run every criterion at full scale
            only: Criterion ids to run (default: all)
        """
        known = [c.criterion_id for c in CRITERIA]
        unknown = sorted(set(only or ()) - set(known))
        if unknown:
            raise ValueError(f"unknown criteria {unknown}; choose from {known}")
        self.full = full
        self.criteria: List[BaseCriterion] = [c(full=full) for c in CRITERIA
                                              if not only or c.criterion_id in only]
        self.workflow = self._create_workflow()
        logger.info(f"Validation workflow with {len(self.criteria)} criteria ({'full' if full else 'quick'} scale)")

    def _create_workflow(self) -> CompiledStateGraph:
        """Create a linear graph with one node per criterion.

        Returns:
            Compiled workflow graph
        """
        workflow = StateGraph(ValidationState)
        names = [c.criterion_id for c in self.criteria]
        for criterion in self.criteria:
            workflow.add_node(criterion.criterion_id, criterion.process)
        for a, b in zip(names, names[1:]):
            workflow.add_edge(a, b)
        workflow.set_entry_point(names[0])
        workflow.add_edge(names[-1], END)
        return workflow.compile()

    def run(self, seed: int = DEFAULT_SEED) -> Scorecard:
        """Execute every criterion and collect the scorecard.

        Args:
            seed: Base seed shared by all criteria

        Returns:
            Scorecard
        """
        started = datetime.now().isoformat()
        logger.info(f"Starting validation with seed {seed}")
        final_state: Dict[str, Any] = self.workflow.invoke(
            ValidationState(seed=seed, results=[], start_time=started)
        )
        scorecard = Scorecard(scale="full" if self.full else "quick", seed=seed, started=started,
                              finished=datetime.now().isoformat(), results=final_state["results"])
        failed = [r.criterion_id for r in scorecard.results if not r.passed]
        if failed:
            logger.warning(f"Validation failed: {failed}")
        else:
            logger.info(f"All {len(scorecard.results)} criteria passed")
        return scorecard
