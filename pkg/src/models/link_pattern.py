from pydantic import BaseModel, ConfigDict, Field
from typing import List, Tuple


class LinkPattern(BaseModel):
    """
    Non-crossing perfect matching of the boundary points 1..2N.
    Links are stored as sorted pairs, ordered by left endpoint.
    """
    model_config = ConfigDict(frozen=True)

    n_links: int = Field(..., ge=1, description="Number of links N")
    links: Tuple[Tuple[int, int], ...] = Field(..., description="N pairs over {1..2N}")

    def partner(self, point: int) -> int:
        for a, b in self.links:
            if a == point:
                return b
            if b == point:
                return a
        raise KeyError(point)

    def __str__(self) -> str:
        return ",".join(f"{a}-{b}" for a, b in self.links)


class CurveLinkPattern(BaseModel):
    """
    Visiting order (i_0, ..., i_{N-1}) of the points 0..N-1 by one simple curve ending at N.
    """
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="Number of visited points N; the curve ends at point N")
    order: Tuple[int, ...]

    def chords(self) -> List[Tuple[int, int]]:
        path = list(self.order) + [self.n]
        return [(path[k], path[k + 1]) for k in range(self.n)]

    def __str__(self) -> str:
        return ",".join(str(i) for i in self.order)


class WeldFace(BaseModel):
    model_config = ConfigDict(frozen=True)

    marked_points: int = Field(..., description="Marked points n_k on the face boundary")
    interfaces: Tuple[int, ...] = Field(..., description="Indices into LinkPattern.links of the bounding links")


class WeldFaces(BaseModel):
    """
    Face structure of the welding picture: the outer face first, then the face
    directly under each link in link order.
    """
    model_config = ConfigDict(frozen=True)

    faces: Tuple[WeldFace, ...]

    def sizes(self) -> Tuple[int, ...]:
        return tuple(face.marked_points for face in self.faces)
