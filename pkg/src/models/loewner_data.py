import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

INFINITY = math.inf


def is_infinite(x: float) -> bool:
    return isinstance(x, float) and math.isinf(x)


class DrivingPath(BaseModel):
    """
    Loewner driving values W(t_k) on an increasing half-plane-capacity grid, W(0) = 0.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kappa: float = Field(..., gt=0.0, lt=8.0)
    times: np.ndarray
    values: np.ndarray

    @model_validator(mode="after")
    def check_grid(self):
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if self.times.size == 0 or self.times[0] != 0.0 or self.values[0] != 0.0:
            raise ValueError("driving path must start at t=0 with W(0)=0")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("driving values must be finite")
        return self

    def increments(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.diff(self.times), np.diff(self.values)


class LoewnerChain(BaseModel):
    """
    Composition of elementary vertical-slit maps. Step k holds the driving constant
    at its new value for capacity dt_k; in centred coordinates the step is
    f -> sign(f - dW_k) * sqrt((f - dW_k)^2 + 4 dt_k).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dt: np.ndarray = Field(default_factory=lambda: np.zeros(0))
    dw: np.ndarray = Field(default_factory=lambda: np.zeros(0))

    @field_validator("dt", "dw", mode="before")
    @classmethod
    def as_float_array(cls, value):
        return np.asarray(value, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def check_steps(self):
        if self.dt.shape != self.dw.shape:
            raise ValueError("dt and dw must have equal length")
        if np.any(self.dt <= 0.0):
            raise ValueError("every step needs positive capacity")
        return self

    @property
    def n_steps(self) -> int:
        return int(self.dt.size)

    @property
    def capacity(self) -> float:
        return math.fsum(self.dt.tolist())

    @property
    def driving_value(self) -> float:
        return math.fsum(self.dw.tolist())

    def to_driving_path(self, kappa: float) -> DrivingPath:
        times = np.concatenate([[0.0], np.cumsum(self.dt)])
        values = np.concatenate([[0.0], np.cumsum(self.dw)])
        return DrivingPath(kappa=kappa, times=times, values=values)


class BoundaryTracker(BaseModel):
    """
    Image f_t(x0) = g_t(x0) - W_t and log f_t'(x0) of a real boundary point.
    """
    model_config = ConfigDict(frozen=True)

    x0: float
    image: Optional[float] = None
    logderiv: Optional[float] = None
    swallowed: bool = False

    @property
    def derivative(self) -> Optional[float]:
        return None if self.logderiv is None else math.exp(self.logderiv)


class MobiusMap(BaseModel):
    """
    z -> (a z + b) / (c z + d) with real coefficients and ad - bc > 0, a self-map of H.
    Derivatives at boundary points follow the conventions: if f(s) = inf then
    f'(s) = (-1/f)'(s); if f(inf) = s then f'(inf) = 1 / (f^{-1})'(s); if f fixes inf
    with f(z) = a + r z then f'(inf) = 1/r.
    """
    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    c: float
    d: float

    @model_validator(mode="after")
    def check_determinant(self):
        if not self.determinant > 0.0:
            raise ValueError("Mobius self-map of H needs ad - bc > 0")
        return self

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(a=1.0, b=0.0, c=0.0, d=1.0)

    @classmethod
    def affine(cls, scale: float, shift: float) -> "MobiusMap":
        return cls(a=scale, b=shift, c=0.0, d=1.0)

    def __call__(self, z):
        if isinstance(z, float) and math.isinf(z):
            return INFINITY if self.c == 0.0 else self.a / self.c
        denominator = self.c * z + self.d
        if not isinstance(z, (complex, np.ndarray)) and denominator == 0.0:
            return INFINITY
        return (self.a * z + self.b) / denominator

    def derivative(self, x: float) -> float:
        det = self.determinant
        if is_infinite(x):
            if self.c == 0.0:
                return self.d / self.a
            return det / (self.c * self.c)
        denominator = self.c * x + self.d
        if denominator == 0.0:
            return det / (self.a * x + self.b) ** 2
        return det / (denominator * denominator)

    def compose(self, inner: "MobiusMap") -> "MobiusMap":
        """
        self o inner.
        """
        return MobiusMap(
            a=self.a * inner.a + self.b * inner.c,
            b=self.a * inner.b + self.b * inner.d,
            c=self.c * inner.a + self.d * inner.c,
            d=self.c * inner.b + self.d * inner.d,
        )

    def inverse(self) -> "MobiusMap":
        return MobiusMap(a=self.d, b=-self.b, c=-self.c, d=self.a)


class CurveTrace(BaseModel):
    """
    Polyline eta(t_k) in the closed upper half-plane, reconstructed from a chain.
    A trace cut short by a numerical branch failure keeps the points computed so far.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    times: np.ndarray
    points: np.ndarray
    truncated: bool = False
    status: str = "ok"

    @property
    def tip(self) -> complex:
        return complex(self.points[-1])

    def max_height(self) -> float:
        return float(np.max(self.points.imag)) if self.points.size else 0.0
