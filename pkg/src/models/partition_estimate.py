from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class PartitionEstimate(BaseModel):
    """
    Monte Carlo estimate of a total mass (partition function or Green's function).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    value: float = Field(..., ge=0.0)
    stderr: float = Field(..., ge=0.0)
    n: int
    depth: int = 1
    failure_rate: float = 0.0
    frame: Dict[str, Any] = Field(default_factory=dict)
    draws: Optional[np.ndarray] = Field(default=None, exclude=True, description="Per-sample unbiased draws, aligned by sample index")

    @property
    def relative_error(self) -> float:
        return self.stderr / self.value if self.value > 0.0 else float("inf")


class PdeResidual(BaseModel):
    coordinate: int
    residual: float
    stderr: float

    @property
    def deviation(self) -> float:
        return abs(self.residual) / self.stderr if self.stderr > 0.0 else float("inf") if self.residual else 0.0


class PdeReport(BaseModel):
    """
    Finite-difference residuals of the second-order operator at each coordinate.
    """
    points: List[float]
    h: float
    value: float
    residuals: List[PdeResidual]


class CovarianceReport(BaseModel):
    """
    R = Z(x) / (prod f'(x_i)^b Z(f(x))) with its paired stderr; R = 1 under covariance.
    """
    points: List[float]
    mapped_points: List[float]
    ratio: float
    stderr: float
    map_coefficients: Tuple[float, float, float, float]

    @property
    def deviation(self) -> float:
        return abs(self.ratio - 1.0) / self.stderr if self.stderr > 0.0 else 0.0
