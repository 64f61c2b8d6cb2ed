from typing import Dict

from greedy import strong_greedy
from nodes.logger_node import logger
from state import SweepState, SweepStatus


class GreedyNode:
    """Runs the strong greedy up to the largest requested N."""

    def run(self, state: SweepState) -> Dict:
        config = state.config
        N_max = min(max(config.n_list, default=0), state.gram.size)
        state.greedy = strong_greedy(state.gram, N_max, config.greedy_tol)
        state.status = SweepStatus.GREEDY_READY

        logger.log_stage_transition("GreedyNode", "ReportNode", {
            "selections": len(state.greedy.selected_indices),
            "stop_reason": state.greedy.stop_reason,
        })
        return {"status": "success", "selections": len(state.greedy.selected_indices), "next_node": "ReportNode"}
