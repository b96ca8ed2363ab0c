import math

from pydantic import BaseModel, ConfigDict, Field


class ExponentTable(BaseModel):
    """
    Scaling exponents attached to kappa = gamma^2.
    """
    model_config = ConfigDict(frozen=True)

    kappa: float = Field(..., gt=0.0, lt=8.0)
    gamma: float
    Q: float
    b: float = Field(..., description="Boundary scaling exponent (6 - kappa) / (2 kappa)")
    b2: float = Field(..., description="Boundary Green exponent 8/kappa - 1")

    def b_rho(self, rho: float) -> float:
        return (rho + 2.0) * (2.0 * rho + 8.0 - self.kappa) / (2.0 * self.kappa)

    def b_weight(self, weight: float) -> float:
        return weight * (weight + 4.0 - self.kappa) / (4.0 * self.kappa)

    def b_W(self, weight: float) -> float:
        return (weight - 2.0) * (weight + 2.0 - self.kappa) / (4.0 * self.kappa)

    def delta(self, beta: float) -> float:
        return beta / 2.0 * (self.Q - beta / 2.0)

    def beta_of_W(self, weight: float) -> float:
        return self.gamma + (2.0 - weight) / self.gamma

    @property
    def chi(self) -> float:
        return 2.0 / self.gamma - self.gamma / 2.0

    @property
    def ig_lambda(self) -> float:
        return math.pi / self.gamma
