import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

SUBCOMMANDS = ("lp", "sle-trace", "zeta", "green", "martingale", "ig", "lqg", "exponents")

# Subcommands whose curves must be simple
SIMPLE_PHASE_COMMANDS = ("zeta", "green", "ig")


class ExperimentConfig(BaseModel):
    """
    Resolved configuration of one experiment run; embedded verbatim in every report.
    """
    model_config = ConfigDict(extra="forbid")

    subcommand: Literal["lp", "sle-trace", "zeta", "green", "martingale", "ig", "lqg", "exponents"]
    mode: Optional[str] = Field(default=None, description="Sub-mode, e.g. enumerate/validate for lp or onepoint/ordered for green")

    kappa: Optional[float] = None
    gamma: Optional[float] = None

    # Combinatorics
    pattern: Optional[str] = Field(default=None, description="Link pattern text form 1-4,2-3")
    order: Optional[str] = Field(default=None, description="Curve link pattern text form 1,2,3,4,0")
    link: Optional[str] = None
    n_links: Optional[int] = None
    rotation: int = 0

    # Marked points and force data
    points: List[float] = Field(default_factory=list)
    x: Optional[float] = Field(default=None, description="Single target point for green and m-rho runs")
    rho: List[float] = Field(default_factory=list)
    rho_tilde: List[float] = Field(default_factory=list)
    lambdas: List[float] = Field(default_factory=list)
    thetas: List[float] = Field(default_factory=list)
    weights: List[float] = Field(default_factory=list, description="Quantum disk weights W_1, W_2")

    # Monte Carlo budgets
    n: int = Field(default=1000, gt=0)
    n_levels: List[int] = Field(default_factory=list)
    dt: float = Field(default=1e-3, gt=0.0)
    horizon: float = Field(default=1.0, gt=0.0)
    t_max: Optional[float] = Field(default=None, gt=0.0, description="Capacity truncation; unset means the default of the run type")
    delta_hit: float = Field(default=1e-3, gt=0.0)
    radii: List[float] = Field(default_factory=list)
    radius: Optional[float] = None
    checkpoints: List[float] = Field(default_factory=list)
    sweeps: int = Field(default=10, ge=0)
    h: Optional[float] = None
    scale: float = Field(default=2.0, gt=0.0)

    # Field parameters
    grid: List[float] = Field(default_factory=lambda: [-4.0, 4.0, 256.0], description="a, b, number of points")
    epsilon: Optional[float] = None
    beta: Optional[float] = None
    betas: List[float] = Field(default_factory=list, description="Insertion weights beta_i")
    locations: List[float] = Field(default_factory=list, description="Insertion locations s_i, inf allowed first")
    insertion_point: Optional[float] = None
    interval: List[float] = Field(default_factory=list)
    length: Optional[float] = None
    window: float = Field(default=2.0, gt=0.0)
    shift: float = 0.0

    # Run control
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=0, ge=0)
    block_size: int = Field(default=512, gt=0)
    output_dir: str = "./reports"
    csv: bool = False
    distance: Literal["proxy", "exact"] = "proxy"
    slit: Literal["vertical"] = "vertical"
    kappa_grid: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def resolve_kappa_gamma(self):
        if self.kappa is not None and self.gamma is not None:
            if not math.isclose(self.kappa, self.gamma * self.gamma, rel_tol=1e-12):
                raise ValueError("give exactly one of kappa and gamma")
        if self.kappa is None and self.gamma is not None:
            self.kappa = self.gamma * self.gamma
        elif self.gamma is None and self.kappa is not None:
            self.gamma = math.sqrt(self.kappa)
        if self.kappa is None and self.subcommand not in ("lp", "exponents"):
            raise ValueError(f"{self.subcommand} needs kappa or gamma")
        if self.kappa is not None and not 0.0 < self.kappa < 8.0:
            raise ValueError(f"kappa={self.kappa} must lie in (0, 8)")
        if self.subcommand in SIMPLE_PHASE_COMMANDS and self.kappa is not None and self.kappa >= 4.0:
            raise ValueError(f"kappa={self.kappa} is outside the simple phase (0, 4) required by {self.subcommand}")
        if self.subcommand == "lqg" and self.gamma is not None and not 0.0 < self.gamma < 2.0:
            raise ValueError(f"gamma={self.gamma} must lie in (0, 2)")
        if self.subcommand in ("zeta", "ig") and any(b <= a for a, b in zip(self.points, self.points[1:])):
            raise ValueError("marked points must be strictly increasing")
        if len(self.grid) != 3:
            raise ValueError("grid takes a, b and the number of points")
        return self
