from typing import List, Optional

from pydantic import BaseModel, Field


class MartingaleCheckpoint(BaseModel):
    time: float
    mean: float
    stderr: float
    initial_value: float

    @property
    def deviation(self) -> float:
        return abs(self.mean - self.initial_value) / self.stderr if self.stderr > 0.0 else 0.0


class MartingaleSeries(BaseModel):
    """
    Stopped means of the change-of-weights martingale at a set of checkpoints.
    """
    initial_value: float = Field(..., ge=0.0)
    checkpoints: List[MartingaleCheckpoint]
    stopped_fraction: float = Field(..., description="Fraction of paths stopped by the exit rule before the last checkpoint")
    lower: float
    upper: float
    n: int


class TerminalWeight(BaseModel):
    """
    Limit weight of a completed curve, with the values seen at successive capacity doublings.
    """
    value: float = Field(..., ge=0.0)
    normalization: float
    converged: bool
    history: List[float] = Field(default_factory=list, description="Weights at T/8, T/4, T/2 and T")
    flagged: bool = False
    flag_reason: Optional[str] = None


class TerminalSummary(BaseModel):
    """
    Terminal weights over a set of curves. Unconverged curves are flagged and left out
    of the mean.
    """
    n: int
    mean: float
    stderr: float
    failure_rate: float
    values: List[float]
    flags: List[bool]


class MarginalComparison(BaseModel):
    """
    KS comparison of the driving value at one capacity: direct SLE_kappa(rho~) against
    SLE_kappa(rho) reweighted by M_t / M_0.
    """
    time: float
    statistic: float
    p_value: float
    effective_sample_size: float
    n: int
