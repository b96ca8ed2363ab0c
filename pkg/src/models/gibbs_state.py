from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from models.link_pattern import LinkPattern
from models.loewner_data import CurveTrace


class GibbsState(BaseModel):
    """
    N disjoint curves realising a link pattern, one per link in the pattern's order,
    with the per-sweep statistics of each curve.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kappa: float
    pattern: LinkPattern
    points: List[float]
    curves: List[CurveTrace]
    height: float = Field(..., description="Height at which sweep_capacities cut each curve")
    sweep_capacities: np.ndarray = Field(..., description="Capacity of every curve up to the fixed height after each sweep, shape (sweeps, N)")
    sweep_heights: np.ndarray = Field(..., description="Max height of every curve after each sweep, shape (sweeps, N)")
    updates: int = 0
    flagged_updates: int = 0
    retries: int = 0
    seed: int

    @property
    def failure_rate(self) -> float:
        return self.flagged_updates / self.updates if self.updates else 0.0


class SweepDrift(BaseModel):
    sweep: int
    mean: float
    difference: float
    stderr: float

    @property
    def deviation(self) -> float:
        return abs(self.difference) / self.stderr if self.stderr > 0.0 else float("inf") if self.difference else 0.0


class StationarityReport(BaseModel):
    """
    Capacity-at-height of one curve across independent chains, each later sweep paired
    against the first sweep after burn-in.
    """
    link: int
    height: float
    chains: int
    burn_in: int
    reference_mean: float
    drifts: List[SweepDrift]
    failure_rate: float

    @property
    def max_deviation(self) -> float:
        return max((drift.deviation for drift in self.drifts), default=0.0)
