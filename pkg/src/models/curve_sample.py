from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.force_config import ForceConfig
from models.loewner_data import DrivingPath, LoewnerChain
from utils.stats_utils import effective_sample_size, mean_stderr


class CurveSample(BaseModel):
    """
    One sampled SLE-type path in the frame where it starts at 0.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    driving: DrivingPath
    chain: LoewnerChain
    forces: ForceConfig = Field(default_factory=ForceConfig)
    tracked_points: np.ndarray = Field(default_factory=lambda: np.zeros(0), description="Initial positions of every tracked point, force points first")
    trajectories: Optional[np.ndarray] = Field(default=None, description="Centred images V - W, shape (steps + 1, points)")
    final_images: np.ndarray = Field(default_factory=lambda: np.zeros(0))
    final_logderivs: np.ndarray = Field(default_factory=lambda: np.zeros(0))
    threshold_time: Optional[float] = None
    hit_time: Optional[float] = None
    hit_index: Optional[int] = None
    flagged: bool = False
    flag_reason: Optional[str] = None

    @property
    def capacity(self) -> float:
        return self.chain.capacity


class WeightedEnsemble(BaseModel):
    """
    Samples with non-negative importance weights and per-sample summary features.
    Arrays stay aligned by sample index; flagged samples keep their slot with weight 0
    and are left out of every estimator.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    weights: np.ndarray
    flags: np.ndarray
    features: Dict[str, np.ndarray] = Field(default_factory=dict)
    bundles: Optional[List[List[CurveSample]]] = None
    seed: int
    depth: int = 1
    prefactor: float = 1.0
    params: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_weights(self):
        if self.weights.shape != self.flags.shape:
            raise ValueError("weights and flags must be aligned")
        accepted = self.weights[~self.flags]
        if not np.all(np.isfinite(accepted)) or np.any(accepted < 0.0):
            raise ValueError("weights must be finite and non-negative")
        return self

    @property
    def n(self) -> int:
        return int(self.weights.size)

    @property
    def n_accepted(self) -> int:
        return int(np.count_nonzero(~self.flags))

    @property
    def failure_rate(self) -> float:
        return float(self.flags.mean()) if self.n else 0.0

    def accepted_weights(self) -> np.ndarray:
        return self.weights[~self.flags]

    def total_mass(self) -> Tuple[float, float]:
        mean, stderr = mean_stderr(self.accepted_weights())
        return self.prefactor * mean, self.prefactor * stderr

    def self_normalized_mean(self, feature: str) -> Tuple[float, float]:
        keep = ~self.flags
        weights = self.weights[keep]
        values = self.features[feature][keep]
        total = weights.sum()
        mean = float(np.sum(weights * values) / total)
        stderr = float(np.sqrt(np.sum(weights ** 2 * (values - mean) ** 2)) / total)
        return mean, stderr

    def ess(self) -> float:
        return effective_sample_size(self.accepted_weights())
