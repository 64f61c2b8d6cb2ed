"""
Width studies over snapshot grids.

The wave family shows the slow N^{-1/2} decay forced by the moving jump; the
smooth family exp(-s(t + x + 2)) is analytic in s and its widths decay
exponentially. A sweep runs as a langgraph pipeline:
GridNode -> WidthNode -> GreedyNode -> ReportNode.
"""

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import ClassVar, Dict, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from langgraph.graph import END, StateGraph
from pydantic import BaseModel, ConfigDict, Field

from config import Family, MinimaxConfig, OutputFormat, SweepConfig
from errors import InfeasibleGridError, InvalidParameterError, WidthError
from manifold import ArrayLike, WaveSnapshot, check_domain, as_output
from nodes.greedy_node import GreedyNode
from nodes.grid_node import GridNode
from nodes.logger_node import logger
from nodes.report_node import ReportNode
from nodes.width_node import WidthNode
from state import SweepReport, SweepState, SweepStatus

SERIES_THRESHOLD = 1e-6
CSV_COLUMNS = ("family", "grid_size", "N", "lower_packing", "lower_dual", "upper", "greedy_error", "pod_tail")


def smooth_inner_product(a: float, b: float) -> float:
    """Closed-form L2 inner product of f_a and f_b over the space-time domain."""
    for value in (a, b):
        if not 0.0 <= value <= 1.0:
            raise InvalidParameterError(f"decay parameter {value!r} outside [0, 1]")
    sigma = a + b
    if sigma < SERIES_THRESHOLD:
        time_factor = 1.0 - sigma / 2.0 + sigma ** 2 / 6.0 - sigma ** 3 / 24.0 + sigma ** 4 / 120.0
        space_factor = 2.0 * (1.0 + sigma ** 2 / 6.0 + sigma ** 4 / 120.0)
    else:
        time_factor = -math.expm1(-sigma) / sigma
        space_factor = 2.0 * math.sinh(sigma) / sigma
    return math.exp(-2.0 * sigma) * time_factor * space_factor


class SmoothSnapshot(BaseModel):
    """f_s(t, x) = exp(-s (t + x + 2)), the analytic contrast family."""

    model_config = ConfigDict(frozen=True)

    family: ClassVar[str] = "smooth"

    s: float = Field(ge=0.0, le=1.0)

    @property
    def cut_slopes(self) -> Tuple[float, ...]:
        return ()

    @property
    def label(self) -> str:
        return f"f[{self.s:.6g}]"

    def evaluate(self, t: ArrayLike, x: ArrayLike) -> ArrayLike:
        t, x = check_domain(t, x)
        return as_output(np.exp(-self.s * (t + x + 2.0)))

    def inner(self, other: "SmoothSnapshot") -> float:
        return smooth_inner_product(self.s, other.s)


def grid_parameters(grid_size: int) -> List[float]:
    """Uniform parameters m / (grid_size - 1) on [0, 1]."""
    if grid_size < 1:
        raise InvalidParameterError(f"grid size {grid_size} must be at least 1")
    if grid_size == 1:
        return [0.0]
    return [m / (grid_size - 1) for m in range(grid_size)]


def snapshot_grid(family: Family, grid_size: int) -> List[Union[WaveSnapshot, SmoothSnapshot]]:
    family = Family(family)
    if family == Family.WAVE:
        return [WaveSnapshot(mu=mu) for mu in grid_parameters(grid_size)]
    return [SmoothSnapshot(s=s) for s in grid_parameters(grid_size)]


class SweepRunner:
    """Runs one sweep through the langgraph pipeline."""

    def __init__(self, config: Optional[SweepConfig] = None):
        self.config = config or SweepConfig()
        self.graph = None

        self.grid_node = GridNode(snapshot_grid)
        self.width_node = WidthNode()
        self.greedy_node = GreedyNode()
        self.report_node = ReportNode()

        self._build_graph()

    def _build_graph(self):
        workflow = StateGraph(SweepState)

        workflow.add_node("GridNode", self._grid_wrapper)
        workflow.add_node("WidthNode", self._width_wrapper)
        workflow.add_node("GreedyNode", self._greedy_wrapper)
        workflow.add_node("ReportNode", self._report_wrapper)

        workflow.set_entry_point("GridNode")

        def route_from_grid(state: SweepState):
            return END if state.status == SweepStatus.ERROR else "WidthNode"

        workflow.add_conditional_edges("GridNode", route_from_grid, {"WidthNode": "WidthNode", END: END})
        workflow.add_edge("WidthNode", "GreedyNode")
        workflow.add_edge("GreedyNode", "ReportNode")
        workflow.add_edge("ReportNode", END)

        self.graph = workflow.compile()

    def _grid_wrapper(self, state: SweepState) -> Dict:
        self.grid_node.run(state)
        return {"gram": state.gram, "status": state.status, "errors": state.errors}

    def _width_wrapper(self, state: SweepState) -> Dict:
        self.width_node.run(state)
        return {
            "estimates": state.estimates,
            "pod_tails": state.pod_tails,
            "packing_grid_counts": state.packing_grid_counts,
            "status": state.status,
            "warnings": state.warnings,
        }

    def _greedy_wrapper(self, state: SweepState) -> Dict:
        self.greedy_node.run(state)
        return {"greedy": state.greedy, "status": state.status}

    def _report_wrapper(self, state: SweepState) -> Dict:
        self.report_node.run(state)
        return {"report": state.report, "status": state.status, "warnings": state.warnings}

    def run(self) -> SweepState:
        final_state = self.graph.invoke(SweepState(config=self.config))
        state = SweepState(**final_state) if isinstance(final_state, dict) else final_state
        if state.status == SweepStatus.ERROR:
            raise InfeasibleGridError("; ".join(state.errors))
        for warning in state.warnings:
            logger.log_event("SWEEP_WARNING", {"warning": warning}, stage="report")
        return state


def run_sweep(family: Family, grid_size: int, n_list: Sequence[int],
              config: Optional[MinimaxConfig] = None, greedy_tol: float = 0.0) -> SweepReport:
    """Bounds, greedy errors and POD tails for each N on a uniform grid."""
    sweep_config = SweepConfig(
        family=Family(family), grid_size=grid_size, n_list=list(n_list),
        minimax=config or MinimaxConfig(), greedy_tol=greedy_tol,
    )
    return SweepRunner(sweep_config).run().report


def _csv_value(value: Optional[float]) -> str:
    return "" if value is None else format(value, ".16e")


def format_csv(report: SweepReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([
            report.family.value,
            report.grid_size,
            row.N,
            _csv_value(row.lower_packing),
            _csv_value(row.lower_dual),
            _csv_value(row.upper),
            _csv_value(row.greedy_error),
            _csv_value(row.pod_tail),
        ])
    return buffer.getvalue()


def format_json(report: SweepReport) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2) + "\n"


def emit_report(report: SweepReport, fmt: OutputFormat = OutputFormat.CSV,
                destination: Union[None, str, Path, TextIO] = None) -> None:
    """Write the report as CSV or JSON to a path, an open stream, or stdout."""
    text = format_csv(report) if OutputFormat(fmt) == OutputFormat.CSV else format_json(report)
    if destination is None:
        sys.stdout.write(text)
    elif isinstance(destination, (str, Path)):
        Path(destination).write_text(text)
    else:
        destination.write(text)


def load_report(path: Union[str, Path]) -> SweepReport:
    """Read a report written by ``emit_report`` in JSON format."""
    try:
        return SweepReport.model_validate_json(Path(path).read_text())
    except ValueError as e:
        raise WidthError(f"{path} is not a sweep report: {e}") from e
