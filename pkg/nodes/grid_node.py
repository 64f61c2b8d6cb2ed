from typing import Callable, Dict, List, Sequence

from config import Family
from geometry import assemble_gram
from nodes.logger_node import logger
from state import SweepState, SweepStatus


class GridNode:
    """Builds the snapshot grid of a sweep and assembles its Gram matrix."""

    def __init__(self, build_snapshots: Callable[[Family, int], List]):
        self.build_snapshots = build_snapshots

    def run(self, state: SweepState) -> Dict:
        config = state.config
        logger.log_event("GRID_NODE_START", {
            "family": config.family.value,
            "grid_size": config.grid_size,
            "n_list": list(config.n_list),
        }, stage="grid")

        validation_result = self._validate_grid(config.grid_size, config.n_list)
        if not validation_result["valid"]:
            logger.log_validation_error("GRID_VALIDATION", validation_result["reason"], stage="grid")
            state.errors.append(validation_result["reason"])
            state.status = SweepStatus.ERROR
            return {"status": "error", "error": validation_result["reason"]}

        snapshots = self.build_snapshots(config.family, config.grid_size)
        state.gram = assemble_gram(snapshots)
        state.status = SweepStatus.GRID_READY

        logger.log_stage_transition("GridNode", "WidthNode", {"snapshots": len(snapshots)})
        return {"status": "success", "snapshots": len(snapshots), "next_node": "WidthNode"}

    def _validate_grid(self, grid_size: int, n_list: Sequence[int]) -> Dict[str, object]:
        """A grid of 2N + 1 points is the smallest that embeds the packing family."""
        if grid_size < 1:
            return {"valid": False, "reason": f"grid size {grid_size} must be at least 1"}
        if any(N < 1 for N in n_list):
            return {"valid": False, "reason": "every N must be at least 1"}
        if n_list and grid_size < 2 * max(n_list) + 1:
            return {
                "valid": False,
                "reason": f"grid size {grid_size} is too small for N={max(n_list)}; need at least {2 * max(n_list) + 1}",
            }
        return {"valid": True, "reason": ""}
