"""
Pattern Service
Exact combinatorics of link patterns (non-crossing matchings of 1..2N) and curve
link patterns (visiting orders of 0..N-1 by one simple curve ending at N).
"""
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

from utils.log_utils import LogUtil
from exceptions.sle_exception import SLEValidationException, SLEBudgetException
from models.link_pattern import CurveLinkPattern, LinkPattern, WeldFace, WeldFaces

MAX_ENUMERATE_LINKS = 10


def _interleave(a: int, b: int, c: int, d: int) -> bool:
    low, high = min(a, b), max(a, b)
    return (low < c < high) != (low < d < high)


@lru_cache(maxsize=None)
def _matchings(points: Tuple[int, ...]) -> Tuple[Tuple[Tuple[int, int], ...], ...]:
    # Non-crossing matchings of consecutive labels: the first point pairs with an
    # odd-offset partner, splitting the rest into an inside and an outside block
    if not points:
        return ((),)
    result = []
    first = points[0]
    for k in range(1, len(points), 2):
        inside = points[1:k]
        outside = points[k + 1:]
        for left in _matchings(inside):
            for right in _matchings(outside):
                result.append(((first, points[k]),) + left + right)
    return tuple(result)


class PatternService:
    """
    Service for validating, enumerating, splitting, rotating and drawing faces of
    link patterns, and for curve link patterns used by the Green's function measures.
    """

    def __init__(self, log_util: LogUtil):
        self.log_util = log_util

    # ---- link patterns -------------------------------------------------------

    def lp_validate(self, candidate: Sequence[Sequence[int]]) -> bool:
        """
        True iff the pairs form a non-crossing perfect matching of 1..2N.
        Malformed input (repeated or out-of-range index) raises instead of returning False.
        """
        pairs = self._normalize_pairs(candidate)
        for i, (a, b) in enumerate(pairs):
            for c, d in pairs[i + 1:]:
                if _interleave(a, b, c, d):
                    return False
        return True

    def to_link_pattern(self, candidate: Sequence[Sequence[int]]) -> LinkPattern:
        if not self.lp_validate(candidate):
            self.log_util.error(service_name="PatternService", message=f"Crossing links in {list(candidate)}")
            raise SLEValidationException(f"Pairs {list(candidate)} cross; not a link pattern")
        pairs = self._normalize_pairs(candidate)
        return LinkPattern(n_links=len(pairs), links=tuple(sorted(pairs)))

    def lp_enumerate(self, n_links: int) -> List[LinkPattern]:
        if not 1 <= n_links <= MAX_ENUMERATE_LINKS:
            self.log_util.error(service_name="PatternService", message=f"Refusing to enumerate LP_{n_links}")
            raise SLEBudgetException(f"N={n_links} outside 1..{MAX_ENUMERATE_LINKS}")
        patterns = [tuple(sorted(m)) for m in _matchings(tuple(range(1, 2 * n_links + 1)))]
        patterns.sort()
        self.log_util.debug(service_name="PatternService", message=f"Enumerated {len(patterns)} link patterns for N={n_links}")
        return [LinkPattern(n_links=n_links, links=links) for links in patterns]

    def lp_split(self, alpha: LinkPattern, link: Sequence[int]) -> Tuple[Optional[LinkPattern], Optional[LinkPattern]]:
        """
        Splits alpha along a link: (pattern strictly inside the link, pattern outside it),
        each relabelled to 1..2k in order. An empty side is None.
        """
        a, b = sorted(int(v) for v in link)
        if (a, b) not in alpha.links:
            raise SLEValidationException(f"Link {a}-{b} is not in {alpha}")
        inside = list(range(a + 1, b))
        outside = [p for p in range(1, 2 * alpha.n_links + 1) if p < a or p > b]
        return self._restrict(alpha, inside), self._restrict(alpha, outside)

    def lp_merge(self, inner: Optional[LinkPattern], outer: Optional[LinkPattern], link: Sequence[int]) -> LinkPattern:
        """
        Inverse of lp_split: places inner strictly inside the link (a, b) and outer around it.
        """
        a, b = sorted(int(v) for v in link)
        n_inner = inner.n_links if inner else 0
        n_outer = outer.n_links if outer else 0
        n_links = n_inner + n_outer + 1
        if b - a - 1 != 2 * n_inner or b > 2 * n_links or a < 1:
            raise SLEValidationException(f"Link {a}-{b} cannot hold {n_inner} inner and {n_outer} outer links")
        inside = list(range(a + 1, b))
        outside = [p for p in range(1, 2 * n_links + 1) if p < a or p > b]
        links = [(a, b)]
        for sub, labels in ((inner, inside), (outer, outside)):
            if sub is not None:
                links.extend((labels[i - 1], labels[j - 1]) for i, j in sub.links)
        return self.to_link_pattern(links)

    def lp_rotate(self, alpha: LinkPattern, m: int) -> LinkPattern:
        size = 2 * alpha.n_links
        shift = lambda i: (i - 1 + m) % size + 1
        links = tuple(sorted(tuple(sorted((shift(i), shift(j)))) for i, j in alpha.links))
        return LinkPattern(n_links=alpha.n_links, links=links)

    def lp_faces(self, alpha: LinkPattern) -> WeldFaces:
        """
        Faces of the disk cut by the links: the outer face first, then the face
        directly under each link. A face bounded by k links carries 2k marked points,
        counting the link endpoints on it.
        """
        if not self.lp_validate(alpha.links):
            raise SLEValidationException(f"{alpha} is not a valid link pattern")
        links = list(alpha.links)
        parent = [self._parent(links, k) for k in range(len(links))]
        faces = []
        top = tuple(k for k in range(len(links)) if parent[k] is None)
        faces.append(WeldFace(marked_points=2 * len(top), interfaces=top))
        for k in range(len(links)):
            children = tuple(j for j in range(len(links)) if parent[j] == k)
            faces.append(WeldFace(marked_points=2 + 2 * len(children), interfaces=(k,) + children))
        return WeldFaces(faces=tuple(faces))

    def lp_outermost(self, alpha: LinkPattern) -> Tuple[int, int]:
        links = list(alpha.links)
        for k, link in enumerate(links):
            if self._parent(links, k) is None:
                return link
        raise SLEValidationException(f"{alpha} has no outermost link")

    # ---- curve link patterns ---------------------------------------------------

    def clp_validate(self, order: Sequence[int]) -> bool:
        """
        Chord-crossing rule: the chords (i_0,i_1), ..., (i_{N-1}, N) may share endpoints
        but no two chords with four distinct endpoints may interleave.
        """
        pattern = self._clp(order)
        chords = pattern.chords()
        for i, (a, b) in enumerate(chords):
            for c, d in chords[i + 1:]:
                if len({a, b, c, d}) == 4 and _interleave(a, b, c, d):
                    return False
        return True

    def to_curve_link_pattern(self, order: Sequence[int]) -> CurveLinkPattern:
        if not self.clp_validate(order):
            self.log_util.error(service_name="PatternService", message=f"Curve link pattern {tuple(order)} is not realisable")
            raise SLEValidationException(f"Order {tuple(order)} is not a curve link pattern")
        return self._clp(order)

    def clp_drop_first(self, alpha: CurveLinkPattern) -> Optional[CurveLinkPattern]:
        """
        Removes the first segment: deletes the start point i_0 and relabels the remaining
        points in line order. None when nothing is left.
        """
        if alpha.n == 1:
            return None
        removed = alpha.order[0]
        order = tuple(i - 1 if i > removed else i for i in alpha.order[1:])
        return CurveLinkPattern(n=alpha.n - 1, order=order)

    # ---- text forms ------------------------------------------------------------

    def parse_lp(self, text: str) -> LinkPattern:
        return self.to_link_pattern(self.parse_pairs(text))

    def parse_pairs(self, text: str) -> List[Tuple[int, ...]]:
        try:
            pairs = [tuple(int(v) for v in item.split("-")) for item in text.replace(" ", "").split(",") if item]
        except ValueError:
            raise SLEValidationException(f"Cannot parse link pattern '{text}'")
        if any(len(pair) != 2 for pair in pairs):
            raise SLEValidationException(f"Cannot parse link pattern '{text}'")
        return pairs

    def format_lp(self, alpha: Optional[LinkPattern]) -> str:
        return "" if alpha is None else str(alpha)

    def parse_clp(self, text: str) -> CurveLinkPattern:
        try:
            order = [int(v) for v in text.replace(" ", "").split(",") if v]
        except ValueError:
            raise SLEValidationException(f"Cannot parse curve link pattern '{text}'")
        return self.to_curve_link_pattern(order)

    def format_clp(self, alpha: Optional[CurveLinkPattern]) -> str:
        return "" if alpha is None else str(alpha)

    # ---- helpers ---------------------------------------------------------------

    def _normalize_pairs(self, candidate: Sequence[Sequence[int]]) -> List[Tuple[int, int]]:
        pairs = []
        for item in candidate:
            values = tuple(item)
            if len(values) != 2:
                raise SLEValidationException(f"Link {values} must have two endpoints")
            pairs.append(tuple(sorted(int(v) for v in values)))
        if not pairs:
            raise SLEValidationException("A link pattern needs at least one link")
        size = 2 * len(pairs)
        seen = [p for pair in pairs for p in pair]
        if len(set(seen)) != len(seen):
            raise SLEValidationException(f"Repeated index in {pairs}")
        if min(seen) < 1 or max(seen) > size:
            raise SLEValidationException(f"Indices of {pairs} must lie in 1..{size}")
        return pairs

    def _restrict(self, alpha: LinkPattern, labels: List[int]) -> Optional[LinkPattern]:
        if not labels:
            return None
        relabel = {p: k + 1 for k, p in enumerate(labels)}
        links = tuple(sorted((relabel[a], relabel[b]) for a, b in alpha.links if a in relabel))
        return LinkPattern(n_links=len(links), links=links)

    def _parent(self, links: List[Tuple[int, int]], k: int) -> Optional[int]:
        a, b = links[k]
        best = None
        for j, (c, d) in enumerate(links):
            if c < a and b < d and (best is None or c > links[best][0]):
                best = j
        return best

    def _clp(self, order: Sequence[int]) -> CurveLinkPattern:
        values = tuple(int(v) for v in order)
        n = len(values)
        if n == 0 or sorted(values) != list(range(n)):
            raise SLEValidationException(f"Order {values} must be a permutation of 0..{max(n - 1, 0)}")
        return CurveLinkPattern(n=n, order=values)
