from typing import Dict, Optional

from errors import DecayFitError
from greedy import fit_decay, positive_prefix
from nodes.logger_node import logger
from state import SweepReport, SweepRow, SweepState, SweepStatus

# upper bounds below this are rounding noise of the Gram eigenvalues
FIT_FLOOR = 1e-12


class ReportNode:
    """Collects the sweep rows and fits the decay of the upper bounds."""

    def run(self, state: SweepState) -> Dict:
        config = state.config
        rows = [
            SweepRow(
                N=estimate.N,
                lower_packing=estimate.lower_packing,
                lower_dual=estimate.lower_dual,
                upper=estimate.upper,
                greedy_error=self._greedy_error(state, estimate.N),
                pod_tail=pod_tail,
                packing_grid_count=state.packing_grid_counts.get(estimate.N),
            )
            for estimate, pod_tail in zip(state.estimates, state.pod_tails)
        ]

        ordered = sorted(rows, key=lambda row: row.N)
        uppers = positive_prefix([row.upper for row in ordered], FIT_FLOOR * max(1.0, float(state.gram.diagonal.max())))
        fit = None
        try:
            fit = fit_decay(uppers, skip_first=0, n_values=[row.N for row in ordered[:len(uppers)]])
        except DecayFitError as e:
            state.warnings.append(f"no decay fit: {e}")

        state.report = SweepReport(
            family=config.family, grid_size=config.grid_size, rows=rows, fit=fit, config=config,
        )
        if not state.report.bounds_consistent():
            state.warnings.append("a lower bound exceeds its upper bound beyond the slack")
        state.status = SweepStatus.COMPLETED

        logger.log_report(
            config.family.value, config.grid_size, len(rows), fit.better_model.value if fit else None,
        )
        return {"status": "completed", "rows": len(rows)}

    def _greedy_error(self, state: SweepState, N: int) -> Optional[float]:
        if state.greedy is None:
            return None
        if N < len(state.greedy.errors):
            return state.greedy.errors[N]
        # stopped early: the span already holds every snapshot to the tolerance
        return state.greedy.errors[-1] if state.greedy.converged else None
