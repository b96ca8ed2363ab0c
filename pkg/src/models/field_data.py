import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.loewner_data import is_infinite


class BoundaryGrid(BaseModel):
    """
    Increasing boundary points x_k, the regularisation scale epsilon and the cells
    (Voronoi intervals around each point) used by GMC sums.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray
    epsilon: float = Field(..., gt=0.0)

    @field_validator("points", mode="before")
    @classmethod
    def as_float_array(cls, value):
        return np.asarray(value, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def check_grid(self):
        if self.points.size < 2:
            raise ValueError("grid needs at least two points")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("grid points must be finite")
        gaps = np.diff(self.points)
        if np.any(gaps <= 0.0):
            raise ValueError("grid points must be strictly increasing")
        if self.epsilon > 0.5 * float(gaps.min()) * (1.0 + 1e-12):
            raise ValueError(f"epsilon {self.epsilon} exceeds half the minimum gap {0.5 * float(gaps.min())}")
        return self

    @classmethod
    def uniform(cls, a: float, b: float, k: int, epsilon: Optional[float] = None) -> "BoundaryGrid":
        points = np.linspace(a, b, k)
        if epsilon is None:
            epsilon = 0.5 * (b - a) / (k - 1)
        return cls(points=points, epsilon=epsilon)

    @property
    def edges(self) -> np.ndarray:
        mid = 0.5 * (self.points[1:] + self.points[:-1])
        first = self.points[0] - (mid[0] - self.points[0])
        last = self.points[-1] + (self.points[-1] - mid[-1])
        return np.concatenate([[first], mid, [last]])

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def clipped_widths(self, a: float, b: float) -> np.ndarray:
        """
        Lebesgue measure of each cell intersected with [a, b].
        """
        edges = self.edges
        lower = np.clip(edges[:-1], a, b)
        upper = np.clip(edges[1:], a, b)
        return upper - lower

    def nearest_index(self, x: float) -> int:
        return int(np.argmin(np.abs(self.points - x)))


class Insertion(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: float
    s: float = Field(..., description="Boundary location; inf for the point at infinity")


class InsertionSpec(BaseModel):
    """
    Boundary insertions (beta_i, s_i); at most one at infinity and if present it is first.
    """
    model_config = ConfigDict(frozen=True)

    insertions: Tuple[Insertion, ...] = ()

    @model_validator(mode="after")
    def check_insertions(self):
        locations = [item.s for item in self.insertions]
        if len(set(locations)) != len(locations):
            raise ValueError("insertion locations must be distinct")
        for position, item in enumerate(self.insertions):
            if is_infinite(item.s) and (position != 0 or item.s < 0):
                raise ValueError("an insertion at infinity must be +inf and listed first")
        return self

    @classmethod
    def build(cls, pairs) -> "InsertionSpec":
        return cls(insertions=tuple(Insertion(beta=float(beta), s=float(s)) for beta, s in pairs))

    @property
    def beta_sum(self) -> float:
        return math.fsum(item.beta for item in self.insertions)

    @property
    def has_infinity(self) -> bool:
        return bool(self.insertions) and is_infinite(self.insertions[0].s)


class BoundaryFieldSample(BaseModel):
    """
    Field values on a boundary grid: centred Gaussian part (one row per replica)
    plus a deterministic mean profile.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: BoundaryGrid
    values: np.ndarray = Field(..., description="Centred field, shape (replicas, points)")
    mean_profile: np.ndarray
    insertions: InsertionSpec = Field(default_factory=InsertionSpec)
    shift: float = 0.0

    @model_validator(mode="after")
    def check_shapes(self):
        if self.values.ndim == 1:
            self.values = self.values[np.newaxis, :]
        if self.values.shape[1] != self.grid.points.size or self.mean_profile.shape != self.grid.points.shape:
            raise ValueError("field values and mean profile must match the grid")
        return self

    @property
    def replicas(self) -> int:
        return int(self.values.shape[0])

    @property
    def field(self) -> np.ndarray:
        return self.values + self.mean_profile[np.newaxis, :]

    def with_mean(self, mean_profile: np.ndarray, insertions: Optional[InsertionSpec] = None, shift: Optional[float] = None) -> "BoundaryFieldSample":
        return BoundaryFieldSample(
            grid=self.grid,
            values=self.values,
            mean_profile=np.asarray(mean_profile, dtype=float),
            insertions=self.insertions if insertions is None else insertions,
            shift=self.shift if shift is None else shift,
        )


class RadialProcess(BaseModel):
    """
    Radial part Y_t of a thick quantum disk of weight W on the window [-T, T].
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    W: float
    gamma: float
    beta: float
    shift: float
    times: np.ndarray
    path: np.ndarray
    attempts: int = 1
    acceptance_rate: float = 1.0

    @property
    def Q(self) -> float:
        return 2.0 / self.gamma + self.gamma / 2.0

    def positive_part(self) -> Tuple[np.ndarray, np.ndarray]:
        keep = self.times > 0.0
        return self.times[keep], self.path[keep]

    def negative_part(self) -> Tuple[np.ndarray, np.ndarray]:
        keep = self.times < 0.0
        return self.times[keep], self.path[keep]
