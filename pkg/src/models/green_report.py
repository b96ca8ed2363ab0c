from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field


class GreenOnePointReport(BaseModel):
    """
    Hitting probabilities P(dist(eta, x) < r) and the fitted log-log slope.
    """
    kappa: float
    x: float
    radii: List[float]
    probabilities: List[float]
    stderrs: List[float]
    slope: float
    slope_stderr: float
    confidence_interval: List[float] = Field(..., description="95% interval for the slope")
    expected_slope: float = Field(..., description="b2 = 8/kappa - 1")
    distance: Literal["proxy", "exact"] = "proxy"
    n: int
    failure_rate: float = 0.0


class GreenOrderedReport(BaseModel):
    """
    r^{-n b2} P(ordered first hits) at r and r/2 and the two-point extrapolation in log r.
    """
    kappa: float
    points: List[float]
    radius: float
    estimates: Dict[str, float]
    stderrs: Dict[str, float]
    hits: Dict[str, int]
    extrapolated: float
    extrapolated_stderr: float
    relative_error: float
    flag: Optional[str] = None
    n: int
    failure_rate: float = 0.0


class MxReversalReport(BaseModel):
    """
    Two-sample KS comparison of the curve from 0 in the reversed bundles of m_x(W1, W2)
    against the curve from 0 in m_x(W2, W1), summarised by its distance to 1. Both sides
    are weighted resamples.
    """
    kappa: float
    W: List[float] = Field(..., description="(W1, W2) of the forward measure")
    x: float
    statistic: float
    p_value: float
    masses: Dict[str, List[float]] = Field(..., description="Total mass and stderr of each measure")
    effective_sample_sizes: Dict[str, float]
    resample_size: int
    n: int
    failure_rate: float = 0.0
