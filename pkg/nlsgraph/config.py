from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings

from nlsgraph.models import Command, TransformName


class Settings(BaseSettings):
    # Where run directories are created
    output_dir: str = "data/runs"

    # Discretization defaults
    step_h: float = 1e-2
    trunc_L: float = 40.0

    # Reproducibility
    seed: int = 0
    workers: int = 1

    log_level: str = "INFO"

    # Normalized gradient flow
    max_iters: int = 4000
    tolerance: float = 1e-6
    stall_window: int = 25
    stall_tol: float = 1e-9  # energy drop over the window, relative to the kinetic energy
    armijo: float = 1e-4
    e_cut: float = 50.0
    width_factor: float = 6.0  # concentration threshold in multiples of h
    multi_start: int = 4

    # Relative slack of inequality checks and allowed mass excess over mu_R
    check_slack: float = 1e-3

    # Relative tolerance for rearrangement re-interpolation
    tol_rearr: float = 5e-3

    # Bumped whenever a CSV column layout changes
    csv_schema: str = "1"

    class Config:
        env_file = ".env"
        env_prefix = "NLSGRAPH_"


settings = Settings()


class SolverConfig(BaseModel):
    """Parameters of the constrained minimization."""

    max_iters: int = Field(default=settings.max_iters, ge=1)
    tolerance: float = Field(default=settings.tolerance, gt=0)
    stall_window: int = Field(default=settings.stall_window, ge=1)
    stall_tol: float = Field(default=settings.stall_tol, gt=0)
    conjugate: bool = True  # Polak-Ribiere directions on top of the preconditioned gradient
    armijo: float = Field(default=settings.armijo, gt=0, lt=1)
    initial_step: float = Field(default=1.0, gt=0)
    min_step: float = Field(default=1e-10, gt=0)
    omega_floor: float = Field(default=0.05, gt=0)
    e_cut: float = Field(default=settings.e_cut, gt=0)
    width_factor: float = Field(default=settings.width_factor, gt=0)
    multi_start: int = Field(default=settings.multi_start, ge=1)
    seed: int = settings.seed
    step_h: float = Field(default=settings.step_h, gt=0)
    trunc_L: float = Field(default=settings.trunc_L, ge=10)
    probe: bool = True  # run the concentration probe before the flows

    def grid_spec(self):
        from nlsgraph.discrete import GridSpec

        return GridSpec(h=self.step_h, L=self.trunc_L)


class GNConfig(BaseModel):
    """Parameters of the Gagliardo-Nirenberg quotient ascent."""

    max_iters: int = Field(default=300, ge=1)
    tolerance: float = Field(default=1e-9, gt=0)  # relative improvement of log Q
    armijo: float = Field(default=1e-4, gt=0, lt=1)
    min_step: float = Field(default=1e-8, gt=0)
    eps_max_exponent: int = Field(default=10, ge=0)  # spread family eps = 2^-k, k = 0..max
    lambdas: list[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0])
    random_starts: int = Field(default=2, ge=0)
    budget: float = Field(default=1e-2, gt=0)
    seed: int = settings.seed
    step_h: float = Field(default=settings.step_h, gt=0)
    trunc_L: float = Field(default=settings.trunc_L, ge=10)

    @field_validator("lambdas")
    @classmethod
    def _positive_lambdas(cls, value: list[float]) -> list[float]:
        if not value or any(lam <= 0 for lam in value):
            raise ValueError("lambdas must be a nonempty list of positive numbers")
        return value

    def grid_spec(self):
        from nlsgraph.discrete import GridSpec

        return GridSpec(h=self.step_h, L=self.trunc_L)


class RunConfig(BaseModel):
    """Effective configuration of one CLI run, echoed into every record."""

    command: Command
    graph: Optional[str] = None
    mass: Optional[float] = Field(default=None, gt=0)
    mass_grid: Optional[list[float]] = None
    transform: Optional[TransformName] = None
    function: Optional[str] = None
    reattach: bool = False
    full: bool = False  # selftest: include the slow acceptance items
    out: str = settings.output_dir
    formats: list[str] = Field(default_factory=lambda: ["json", "csv", "plot"])
    workers: int = Field(default=settings.workers, ge=1)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    gn: GNConfig = Field(default_factory=GNConfig)

    @field_validator("mass_grid")
    @classmethod
    def _increasing_grid(cls, value: Optional[list[float]]) -> Optional[list[float]]:
        if value is None:
            return value
        if not value:
            raise ValueError("mass grid is empty")
        if any(m <= 0 for m in value):
            raise ValueError("masses must be positive")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("mass grid must be strictly increasing")
        return value

    @field_validator("formats")
    @classmethod
    def _known_formats(cls, value: list[str]) -> list[str]:
        unknown = set(value) - {"json", "csv", "plot"}
        if unknown:
            raise ValueError(f"unknown output formats: {sorted(unknown)}")
        return value

    @model_validator(mode="after")
    def _command_arguments(self) -> "RunConfig":
        if self.command != Command.SELFTEST and not self.graph:
            raise ValueError(f"{self.command.value} needs a graph")
        if self.command == Command.SOLVE and self.mass is None:
            raise ValueError("solve needs a mass")
        if self.command == Command.SCAN and not self.mass_grid:
            raise ValueError("scan needs a mass grid")
        if self.command == Command.TRANSFORM:
            if self.transform is None:
                raise ValueError("transform needs a transform name")
            if self.transform != TransformName.BRIDGE_DOUBLE and not self.function:
                raise ValueError(f"transform {self.transform.value} needs a function file")
        if self.function and not Path(self.function).is_file():
            raise ValueError(f"function file not found: {self.function}")
        if self.graph:
            from nlsgraph.graph_io import graph_reference_exists

            if not graph_reference_exists(self.graph):
                raise ValueError(f"graph not found: {self.graph}")
        return self
