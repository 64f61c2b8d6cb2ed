from enum import Enum
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field


class Family(str, Enum):
    """Snapshot families available to the studies."""
    WAVE = "wave"
    SMOOTH = "smooth"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class MinimaxConfig(BaseModel):
    """Configuration for the numerical minimax width estimator."""

    model_config = ConfigDict(frozen=True)

    # Outer search
    restarts: int = Field(8, ge=1)
    max_iterations: int = Field(500, ge=1)
    weight_learning_rate: float = Field(1.0, gt=0.0, le=10.0)
    convergence_tol: float = Field(1e-8, gt=0.0)
    seed: int = Field(42, ge=0)

    # Stop a restart once upper - lower_dual is below this fraction of upper
    gap_tol: float = Field(1e-3, gt=0.0, lt=1.0)
    # Stop a restart when the gap shrank by less than 1% over this many iterations
    patience: int = Field(50, ge=1)
    # Log-normal spread of the initial weights of restarts 1..R-1
    perturbation: float = Field(0.5, ge=0.0)

    # SLSQP refinement of the best witness when the restarts leave a gap (0 disables it)
    refine_iterations: int = Field(200, ge=0)

    threads: Optional[int] = Field(None, ge=1)


class SweepConfig(BaseModel):
    """Configuration for one width sweep over a snapshot grid."""

    family: Family = Family.WAVE
    grid_size: int = Field(33, ge=1)
    n_list: List[int] = Field(default_factory=lambda: list(range(1, 9)))
    minimax: MinimaxConfig = Field(default_factory=MinimaxConfig)
    greedy_tol: float = Field(0.0, ge=0.0)


class CliConfig(BaseModel):
    """Options shared by the command-line subcommands."""

    subcommand: str = "sweep"
    family: Family = Family.WAVE
    grid: int = Field(33, ge=1)
    nmax: int = Field(8, ge=1)
    seed: int = Field(42, ge=0)
    tol: float = Field(1e-8, gt=0.0)
    format: OutputFormat = OutputFormat.CSV
    out: Optional[Path] = None  # None writes to stdout
    threads: Optional[int] = Field(None, ge=1)
    log_path: Optional[Path] = None

    def minimax_config(self) -> MinimaxConfig:
        return MinimaxConfig(seed=self.seed, convergence_tol=self.tol, threads=self.threads)

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(
            family=self.family,
            grid_size=self.grid,
            n_list=list(range(1, self.nmax + 1)),
            minimax=self.minimax_config(),
        )


# Default configuration instances
DEFAULT_MINIMAX_CONFIG = MinimaxConfig()
DEFAULT_CONFIG = CliConfig()
