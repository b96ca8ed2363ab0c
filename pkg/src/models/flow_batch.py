from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.loewner_data import LoewnerChain

FLAG_NONE = 0
FLAG_UNDERFLOW = 1
FLAG_HORIZON = 2
FLAG_TICKS = 3

FLAG_NAMES = {
    FLAG_UNDERFLOW: "underflow",
    FLAG_HORIZON: "horizon",
    FLAG_TICKS: "ticks",
}


class FlowOptions(BaseModel):
    """
    Discretisation of one batch run of the driving SDE.
    """
    model_config = ConfigDict(frozen=True)

    dt: float = Field(default=1e-3, gt=0.0, description="Base capacity step")
    horizon: float = Field(default=1.0, gt=0.0, description="Capacity at which every lane stops")
    schedule: Literal["uniform", "scaled"] = Field(default="uniform", description="scaled grows the step with t for infinity-truncated runs")
    ramp: float = Field(default=0.05, gt=0.0)
    substep: float = Field(default=0.01, gt=0.0, description="Step cap as a multiple of the squared gap to a sensitive point")
    delta_hit: float = Field(default=1e-3, gt=0.0)
    epsilon_start: float = Field(default=1e-6, gt=0.0, description="Offset of force points at 0^+ and 0^-")
    min_dt: float = Field(default=1e-16, gt=0.0)
    checkpoints: Tuple[float, ...] = ()
    hit_radii: Tuple[float, ...] = ()
    record_chains: bool = False
    max_ticks: int = Field(default=2_000_000, gt=0)

    @field_validator("checkpoints", "hit_radii", mode="before")
    @classmethod
    def as_sorted_tuple(cls, value):
        values = tuple(sorted(float(v) for v in value))
        if any(v <= 0.0 for v in values):
            raise ValueError("checkpoints and radii must be positive")
        return values


class FlowBatch(BaseModel):
    """
    Terminal state of n lanes of the driving process and of every tracked boundary
    point (force points first), together with the events and records of the run.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kappa: float
    positions: np.ndarray = Field(..., description="Initial positions, shape (n, p)")
    weights: np.ndarray = Field(..., description="Force weight per point, zero for passive points")
    sides: np.ndarray = Field(..., description="-1 for points left of the start, +1 for points right of it")
    W: np.ndarray
    t: np.ndarray
    images: np.ndarray
    logderivs: np.ndarray
    collided: np.ndarray
    event_time: np.ndarray
    event_index: np.ndarray
    hit: np.ndarray
    threshold: np.ndarray
    flags: np.ndarray
    stop_time: np.ndarray
    checkpoint_times: np.ndarray
    checkpoint_W: np.ndarray
    checkpoint_images: np.ndarray
    checkpoint_logderivs: np.ndarray
    min_proxy: np.ndarray
    first_hit: np.ndarray = Field(..., description="First time the distance proxy drops below each radius, shape (n, p, radii)")
    chains: Optional[List[LoewnerChain]] = None

    @property
    def n(self) -> int:
        return int(self.W.size)

    @property
    def flagged(self) -> np.ndarray:
        return self.flags != FLAG_NONE

    @property
    def derivatives(self) -> np.ndarray:
        return np.exp(self.logderivs)

    @property
    def failure_rate(self) -> float:
        return float(self.flagged.mean()) if self.n else 0.0

    def flag_counts(self) -> dict:
        return {name: int(np.count_nonzero(self.flags == code)) for code, name in FLAG_NAMES.items()}

    @classmethod
    def concat(cls, batches: List["FlowBatch"]) -> "FlowBatch":
        first = batches[0]
        if len(batches) == 1:
            return first
        chains = None
        if first.chains is not None:
            chains = [chain for batch in batches for chain in batch.chains]
        stacked = {
            name: np.concatenate([getattr(batch, name) for batch in batches], axis=0)
            for name in (
                "positions", "W", "t", "images", "logderivs", "collided", "event_time",
                "event_index", "hit", "threshold", "flags", "stop_time", "checkpoint_W",
                "checkpoint_images", "checkpoint_logderivs", "min_proxy", "first_hit",
            )
        }
        return cls(
            kappa=first.kappa,
            weights=first.weights,
            sides=first.sides,
            checkpoint_times=first.checkpoint_times,
            chains=chains,
            **stacked,
        )
