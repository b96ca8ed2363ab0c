from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from models.curve_sample import CurveSample
from models.force_config import ForceConfig
from models.loewner_data import CurveTrace


class FlowLine(BaseModel):
    """
    One flow line: its SLE_kappa(rho) data in the frame it was drawn in and its trace
    pulled back to the original half-plane.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int = Field(..., description="Position of the start point in x, from 0")
    start: float
    angle: float
    forces: ForceConfig
    sample: CurveSample
    trace: CurveTrace


class FlowLineEnsemble(BaseModel):
    """
    Flow lines from x_1 < ... < x_n of a field with boundary values lambda_0..lambda_n,
    drawn from the rightmost start point to the leftmost.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kappa: float
    points: List[float]
    lambdas: List[float]
    angles: List[float]
    rho: List[float]
    lines: List[FlowLine] = Field(..., description="Ordered by start point")
    seed: int
    flagged: bool = False
    flag_reason: Optional[str] = None
