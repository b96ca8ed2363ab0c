from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import List, Literal, Tuple


class ForcePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    position: float = Field(..., description="Real position; 0 with side L/R stands for 0^- / 0^+")
    side: Literal["L", "R"]
    weight: float = Field(..., description="Force weight rho")


class ForceConfig(BaseModel):
    """
    Force points of an SLE_kappa(rho) process, listed outward from the start point on each side.
    """
    model_config = ConfigDict(frozen=True)

    points: Tuple[ForcePoint, ...] = ()

    @model_validator(mode="after")
    def check_order(self):
        for side in ("L", "R"):
            positions = [p.position for p in self.points if p.side == side]
            if side == "L" and any(x > 0.0 for x in positions):
                raise ValueError("left force points must lie at or left of 0")
            if side == "R" and any(x < 0.0 for x in positions):
                raise ValueError("right force points must lie at or right of 0")
            distances = [abs(x) for x in positions]
            if distances != sorted(distances):
                raise ValueError(f"{side} force points must be ordered outward from 0")
        return self

    @classmethod
    def build(cls, points: List[Tuple[float, str, float]]) -> "ForceConfig":
        """
        Builds a config from (position, side, weight) triples in any order.
        """
        items = [ForcePoint(position=float(x), side=s, weight=float(w)) for x, s, w in points]
        items.sort(key=lambda p: (p.side, abs(p.position)))
        return cls(points=tuple(items))

    def side_points(self, side: str) -> List[ForcePoint]:
        return [p for p in self.points if p.side == side]

    def partial_sums(self, side: str) -> List[float]:
        total = 0.0
        sums = []
        for point in self.side_points(side):
            total += point.weight
            sums.append(total)
        return sums

    def above_threshold(self) -> bool:
        return all(s > -2.0 for side in ("L", "R") for s in self.partial_sums(side))
