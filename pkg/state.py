from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from config import Family, SweepConfig

BOUND_SLACK = 1e-9


class SweepStatus(str, Enum):
    """Status of a sweep pipeline run."""
    INITIALIZED = "initialized"
    GRID_READY = "grid_ready"
    WIDTHS_READY = "widths_ready"
    GREEDY_READY = "greedy_ready"
    COMPLETED = "completed"
    ERROR = "error"


class DecayModel(str, Enum):
    ALGEBRAIC = "algebraic"
    EXPONENTIAL = "exponential"


class SubspaceDescriptor(BaseModel):
    """Serializable record of the subspace that realizes an upper bound."""
    dim: int
    source: str  # "pod", "weighted_pod", "refined", "warm_start", "full_range"
    restart: Optional[int] = None
    iteration: Optional[int] = None
    coeffs: List[List[float]] = Field(default_factory=list)


class WidthEstimate(BaseModel):
    """Bounds on the Kolmogorov N-width of a finite snapshot set."""
    N: int
    lower_packing: Optional[float] = None  # None when not applicable
    lower_dual: float = 0.0
    upper: float = 0.0
    upper_witness: Optional[SubspaceDescriptor] = None
    iterations: int = 0
    converged: bool = False
    stop_reason: str = ""
    provenance: Dict[str, str] = Field(default_factory=dict)

    def best_lower(self) -> float:
        return max(self.lower_dual, self.lower_packing or 0.0)

    def bounds_consistent(self, slack: float = BOUND_SLACK) -> bool:
        """Check that every certified lower bound sits below the upper bound."""
        return self.best_lower() <= self.upper + slack and min(self.lower_dual, self.upper) >= 0.0


class ChainReport(BaseModel):
    """Outcome of reproducing the packing argument for one N."""
    N: int
    M_grid: int
    packing_bound: float
    chain_value: float
    chain_verified: bool
    psi_tilde_width: float
    phi_estimate: Optional[WidthEstimate] = None
    psi_estimate: Optional[WidthEstimate] = None
    numerical_ordering_holds: Optional[bool] = None


class GreedyTrace(BaseModel):
    """Selections and sup residuals of a strong greedy run."""
    selected_indices: List[int] = Field(default_factory=list)
    errors: List[float] = Field(default_factory=list)  # errors[n] = sup residual with n selections
    N_max: int = 0
    converged: bool = False
    stop_reason: str = ""


class DecayFit(BaseModel):
    """Least-squares fits of an error sequence by algebraic and exponential models."""
    algebraic_exponent: float
    algebraic_constant: float
    algebraic_r2: float
    exponential_rate: float
    exponential_constant: float
    exponential_r2: float
    better_model: DecayModel
    n_values: List[int] = Field(default_factory=list)


class SweepRow(BaseModel):
    N: int
    lower_packing: Optional[float] = None
    lower_dual: float
    upper: float
    greedy_error: Optional[float] = None
    pod_tail: float
    packing_grid_count: Optional[int] = None  # M of the embedded hat family


class SweepReport(BaseModel):
    """Rows of bounds for one snapshot family and grid."""
    family: Family
    grid_size: int
    rows: List[SweepRow] = Field(default_factory=list)
    fit: Optional[DecayFit] = None
    config: SweepConfig

    def bounds_consistent(self, slack: float = BOUND_SLACK) -> bool:
        return all(
            max(row.lower_dual, row.lower_packing or 0.0, row.pod_tail) <= row.upper + slack
            for row in self.rows
        )


class SweepState(BaseModel):
    """Main state for the langgraph sweep workflow."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: SweepConfig = Field(default_factory=SweepConfig)
    status: SweepStatus = SweepStatus.INITIALIZED

    # Stage outputs
    gram: Optional[Any] = None  # geometry.GramMatrix
    estimates: List[WidthEstimate] = Field(default_factory=list)
    pod_tails: List[float] = Field(default_factory=list)
    packing_grid_counts: Dict[int, int] = Field(default_factory=dict)  # N -> M of the embedded hat family
    greedy: Optional[GreedyTrace] = None
    report: Optional[SweepReport] = None

    # Validation and errors
    errors: List[str] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
