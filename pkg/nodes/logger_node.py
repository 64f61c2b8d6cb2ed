import json
import threading
from collections import deque
from datetime import datetime
from pathlib import Path
from typing import Any, Deque, Dict, Optional

MAX_MEMORY_EVENTS = 10_000


class LoggerNode:
    """Structured event log for the width studies.

    The latest ``max_events`` events are kept in memory; once ``configure``
    has been given a directory every event is also appended to a timestamped
    JSONL file.
    """

    def __init__(self, log_path: Optional[Path] = None, max_events: int = MAX_MEMORY_EVENTS):
        self._lock = threading.Lock()
        self._log_entries: Deque[Dict[str, Any]] = deque(maxlen=max_events)
        self._dropped = 0
        self.log_file: Optional[Path] = None
        if log_path is not None:
            self.configure(log_path)

    def configure(self, log_path: Optional[Path]) -> Optional[Path]:
        """Start writing events to a new log file under ``log_path``."""
        if log_path is None:
            self.log_file = None
            return None
        log_path = Path(log_path)
        log_path.mkdir(parents=True, exist_ok=True)

        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        self.log_file = log_path / f"width_log_{timestamp}.jsonl"
        return self.log_file

    def log_event(self, event_type: str, details: Dict[str, Any], stage: str = "") -> None:
        """Log a single event."""
        event = {
            "timestamp": datetime.now().isoformat(),
            "event_type": event_type,
            "stage": stage,
            "details": details,
        }

        with self._lock:
            if len(self._log_entries) == self._log_entries.maxlen:
                self._dropped += 1
            self._log_entries.append(event)
            if self.log_file is not None:
                with open(self.log_file, "a") as f:
                    f.write(json.dumps(event, default=str) + "\n")

    def log_stage_transition(self, from_node: str, to_node: str, details: Optional[Dict[str, Any]] = None) -> None:
        """Log transitions between pipeline nodes."""
        self.log_event("STATE_TRANSITION", {
            "from_node": from_node,
            "to_node": to_node,
            **(details or {}),
        }, stage=from_node)

    def log_width_estimate(self, N: int, lower_dual: float, upper: float, converged: bool,
                           stage: str = "widths") -> None:
        self.log_event("WIDTH_ESTIMATE", {
            "N": N,
            "lower_dual": lower_dual,
            "upper": upper,
            "gap": upper - lower_dual,
            "converged": converged,
        }, stage=stage)

    def log_greedy_step(self, step: int, index: int, error: float) -> None:
        self.log_event("GREEDY_STEP", {
            "step": step,
            "selected_index": index,
            "sup_residual": error,
        }, stage="greedy")

    def log_validation_error(self, error_type: str, reason: str, stage: str = "") -> None:
        """Log validation errors."""
        self.log_event("VALIDATION_ERROR", {
            "error_type": error_type,
            "reason": reason,
        }, stage=stage)

    def log_report(self, family: str, grid_size: int, rows: int, better_model: Optional[str]) -> None:
        self.log_event("REPORT", {
            "family": family,
            "grid_size": grid_size,
            "rows": rows,
            "better_model": better_model,
        }, stage="report")

    def get_log_file(self) -> Optional[Path]:
        """Get the path to the log file."""
        return self.log_file

    def export_full_log(self) -> Dict[str, Any]:
        """Export the full log as a complete JSON structure."""
        with self._lock:
            events = list(self._log_entries)
            dropped = self._dropped
        return {
            "metadata": {
                "created_at": datetime.now().isoformat(),
                "total_events": len(events),
                "dropped_events": dropped,
                "log_file": str(self.log_file) if self.log_file else None,
            },
            "events": events,
        }

    def clear(self) -> None:
        with self._lock:
            self._log_entries.clear()
            self._dropped = 0


# Global logger instance
logger = LoggerNode()
