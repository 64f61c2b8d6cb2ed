from typing import Dict

from config import Family
from nodes.logger_node import logger
from state import SweepState, SweepStatus
from widths import packing_lower_bound_for_grid, uniform_dual_lower_bound, width_profile


class WidthNode:
    """Minimax bounds, packing bounds and POD tails for every requested N."""

    def run(self, state: SweepState) -> Dict:
        config = state.config
        gram = state.gram
        logger.log_event("WIDTH_NODE_START", {"n_list": list(config.n_list), "snapshots": gram.size}, stage="widths")

        estimates = width_profile(gram, config.n_list, config.minimax)
        for estimate in estimates:
            if config.family == Family.WAVE:
                packing = packing_lower_bound_for_grid(estimate.N, config.grid_size)
                if packing is None:
                    state.warnings.append(f"no hat family of the grid certifies a packing bound at N={estimate.N}")
                else:
                    estimate.lower_packing = packing[0]
                    estimate.provenance["lower_packing"] = f"hat family with M={packing[1]}"
                    state.packing_grid_counts[estimate.N] = packing[1]
            if not estimate.converged:
                state.warnings.append(
                    f"minimax search at N={estimate.N} stopped with gap {estimate.upper - estimate.lower_dual:.3e}"
                )

        state.estimates = estimates
        state.pod_tails = [uniform_dual_lower_bound(gram, N) for N in config.n_list]
        state.status = SweepStatus.WIDTHS_READY

        logger.log_stage_transition("WidthNode", "GreedyNode", {"rows": len(estimates)})
        return {"status": "success", "rows": len(estimates), "next_node": "GreedyNode"}
