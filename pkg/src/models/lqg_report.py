from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class MeanShift(BaseModel):
    x: float
    shift: float
    expected: float
    stderr: float


class GirsanovReport(BaseModel):
    """
    Reweighted field means against (beta/2) G_H^reg(s, x) on every grid point.
    """
    beta: float
    s: float
    epsilon: float
    n: int
    effective_sample_size: float
    max_deviation: float = Field(..., description="Largest |shift - expected| / stderr over the grid")
    shifts: List[MeanShift]

    def shift_at(self, x: float) -> MeanShift:
        return min(self.shifts, key=lambda item: abs(item.x - x))


class FieldCovarianceReport(BaseModel):
    """
    Empirical covariance of centred boundary field samples against the regularised kernel.
    """
    n: int
    grid_size: int
    epsilon: float
    max_deviation: float
    worst_pair: Tuple[float, float]
    mean_abs_deviation: float


class DiskLengths(BaseModel):
    """
    Left and right boundary lengths, one entry per field replica, of the radial part of a
    quantum disk on the window |log|x|| <= T.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    W: float
    gamma: float
    window: float
    left: np.ndarray
    right: np.ndarray


class WindowDoublingReport(BaseModel):
    """
    Mean total boundary length of a quantum disk on the window T against 2T, both cut
    from one radial path sampled on [-2T, 2T].
    """
    W: float
    gamma: float
    window: float
    length: Tuple[float, float] = Field(..., description="Mean and stderr on the window T")
    doubled_length: Tuple[float, float] = Field(..., description="Mean and stderr on the window 2T")
    deviation: float = Field(..., description="|change| / stderr of the doubled-window mean")
    stable: bool
