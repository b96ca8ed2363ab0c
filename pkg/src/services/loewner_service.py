"""
Loewner Service
Deterministic chordal Loewner machinery: vertical-slit chains, boundary trackers,
trace reconstruction, Mobius frames and hitting-distance surrogates.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.log_utils import LogUtil
from exceptions.sle_exception import SLEValidationException
from models.loewner_data import (
    BoundaryTracker,
    CurveTrace,
    DrivingPath,
    LoewnerChain,
    MobiusMap,
    is_infinite,
)


def upper_sqrt(w: np.ndarray, hint: np.ndarray) -> np.ndarray:
    """
    Square root on the branch with non-negative imaginary part; on the real axis
    the sign follows ``hint``.
    """
    root = np.sqrt(np.asarray(w, dtype=complex))
    root = np.where(root.imag < 0.0, -root, root)
    real_axis = root.imag == 0.0
    return np.where(real_axis & (np.asarray(hint).real < 0.0), -np.abs(root.real) + 0j, root)


def slit_step(z: np.ndarray, dw: float, dt: float) -> np.ndarray:
    u = z - dw
    return upper_sqrt(u * u + 4.0 * dt, u)


def inverse_slit_step(w: np.ndarray, dw: float, dt: float) -> np.ndarray:
    return dw + upper_sqrt(w * w - 4.0 * dt, w)


class LoewnerService:
    """
    Service for forward solves, boundary tracking and traces of chordal Loewner chains
    built from elementary vertical-slit steps.
    """

    def __init__(self, log_util: LogUtil):
        self.log_util = log_util

    # ---- chains --------------------------------------------------------------

    def chain_advance(self, chain: LoewnerChain, dw: float, dt: float) -> LoewnerChain:
        if not dt > 0.0:
            raise SLEValidationException(f"capacity increment must be positive, got {dt}")
        return LoewnerChain(dt=np.append(chain.dt, dt), dw=np.append(chain.dw, dw))

    def chain_from_driving(self, driving: DrivingPath) -> LoewnerChain:
        dt, dw = driving.increments()
        return LoewnerChain(dt=dt, dw=dw)

    def map_points_forward(self, chain: LoewnerChain, z) -> np.ndarray:
        """
        Centred images f_t(z) = g_t(z) - W_t of points in the closed upper half-plane.
        """
        w = np.asarray(z, dtype=complex).copy()
        for dt, dw in zip(chain.dt, chain.dw):
            w = slit_step(w, dw, dt)
        return w

    def chain_forward(self, chain: LoewnerChain, z) -> np.ndarray:
        """
        g_t(z) itself, hydrodynamically normalised at infinity.
        """
        return self.map_points_forward(chain, z) + chain.driving_value

    def map_points_inverse(self, chain: LoewnerChain, w) -> np.ndarray:
        """
        Pulls centred images back through the chain: returns z with f_t(z) = w.
        """
        z = np.asarray(w, dtype=complex).copy()
        for dt, dw in zip(chain.dt[::-1], chain.dw[::-1]):
            z = inverse_slit_step(z, dw, dt)
        return z

    # ---- boundary trackers ---------------------------------------------------

    def track_points(
        self,
        chain: LoewnerChain,
        xs: Sequence[float],
        sides: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Returns (images, log-derivatives, swallowed) for real points. A point is swallowed
        by the step whose increment reaches or crosses its centred image. With ``sides``
        a crossed point restarts at side * 2 sqrt(dt), as in the flow engine.
        """
        f = np.asarray(xs, dtype=float).copy()
        logd = np.zeros_like(f)
        swallowed = np.zeros(f.shape, dtype=bool)
        for dt, dw in zip(chain.dt, chain.dw):
            u = f - dw
            crossed = (np.sign(u) != np.sign(f)) | (u == 0.0)
            swallowed |= crossed
            root = np.sqrt(u * u + 4.0 * dt)
            with np.errstate(divide="ignore"):
                logd = logd + np.log(np.abs(u) / root)
            f = np.sign(u) * root
            if sides is not None:
                f = np.where(crossed, sides * 2.0 * np.sqrt(dt), f)
                logd = np.where(crossed, -np.inf, logd)
        return f, logd, swallowed

    def chain_track(self, chain: LoewnerChain, x: float) -> BoundaryTracker:
        images, logds, swallowed = self.track_points(chain, [x])
        if swallowed[0]:
            return BoundaryTracker(x0=x, swallowed=True)
        return BoundaryTracker(x0=x, image=float(images[0]), logderiv=float(logds[0]))

    def distance_proxy(self, chain: LoewnerChain, x: float) -> float:
        tracker = self.chain_track(chain, x)
        if tracker.swallowed:
            return 0.0
        return abs(tracker.image) / tracker.derivative

    # ---- traces --------------------------------------------------------------

    def chain_trace(self, chain: LoewnerChain, stride: int = 1) -> CurveTrace:
        """
        eta(t_k) = f_{t_k}^{-1}(0) for every stride-th step, by composing the inverse
        elementary maps backwards for all requested tips at once.
        """
        if stride < 1:
            raise SLEValidationException("trace stride must be at least 1")
        m = chain.n_steps
        times = np.concatenate([[0.0], np.cumsum(chain.dt)])
        steps = np.arange(stride, m + 1, stride)
        if m and (steps.size == 0 or steps[-1] != m):
            steps = np.append(steps, m)
        tips = np.zeros(steps.size, dtype=complex)
        for j in range(m, 0, -1):
            first = int(np.searchsorted(steps, j))
            if first >= steps.size:
                continue
            tips[first:] = inverse_slit_step(tips[first:], chain.dw[j - 1], chain.dt[j - 1])
        tips = tips.real + 1j * np.maximum(tips.imag, 0.0)
        points = np.concatenate([[0j], tips])
        sample_times = np.concatenate([[0.0], times[steps]])
        finite = np.isfinite(points)
        if not finite.all():
            cut = int(np.argmin(finite))
            self.log_util.warning(service_name="LoewnerService", message=f"Trace branch failure at step {steps[cut - 1]}; truncating")
            return CurveTrace(times=sample_times[:cut], points=points[:cut], truncated=True, status="branch_failure")
        return CurveTrace(times=sample_times, points=points)

    def trace_distance(self, trace: CurveTrace, x: complex) -> float:
        """
        Euclidean distance from x to the polyline.
        """
        points = trace.points
        if points.size == 1:
            return float(abs(points[0] - x))
        start = points[:-1]
        seg = points[1:] - start
        length2 = np.abs(seg) ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(length2 > 0.0, ((x - start) * np.conj(seg)).real / length2, 0.0)
        nearest = start + np.clip(s, 0.0, 1.0) * seg
        return float(np.min(np.abs(nearest - x)))

    def refit_capacity(self, polyline: Sequence[complex]) -> LoewnerChain:
        """
        Vertical-slit zipper: each next vertex, in the current uniformised frame a + ib,
        is removed by the step dW = a, dt = b^2/4. Real vertices only shift the frame.
        """
        remaining = np.asarray(polyline, dtype=complex)
        if remaining.size and remaining[0] == 0:
            remaining = remaining[1:]
        dts: List[float] = []
        dws: List[float] = []
        pending = 0.0
        for k in range(remaining.size):
            a, b = remaining[k].real, remaining[k].imag
            if b <= 0.0:
                pending += a
                remaining = remaining - a
                continue
            dw, dt = a, 0.25 * b * b
            tail = slit_step(remaining[k:], dw, dt)
            remaining = np.concatenate([remaining[:k], tail])
            dts.append(dt)
            dws.append(pending + dw)
            pending = 0.0
        return LoewnerChain(dt=np.array(dts), dw=np.array(dws))

    # ---- frames --------------------------------------------------------------

    def mobius_frame(self, a: float, b: float, points: Optional[Sequence[float]] = None) -> MobiusMap:
        """
        Mobius self-map of H sending (a, b) to (0, inf). With ``points`` the map is
        rescaled so that their finite images lie in [-2, 2].
        """
        if a == b:
            raise SLEValidationException("frame endpoints must differ")
        if is_infinite(a) and is_infinite(b):
            raise SLEValidationException("frame endpoints must differ")
        if is_infinite(b):
            frame = MobiusMap(a=1.0, b=-a, c=0.0, d=1.0)
        elif is_infinite(a):
            frame = MobiusMap(a=0.0, b=1.0, c=-1.0, d=b)
        elif a < b:
            frame = MobiusMap(a=1.0, b=-a, c=-1.0, d=b)
        else:
            frame = MobiusMap(a=1.0, b=-a, c=1.0, d=-b)
        if points:
            images = [frame(float(x)) for x in points]
            finite = [abs(v) for v in images if not is_infinite(v)]
            spread = max(finite) if finite else 0.0
            if spread > 0.0:
                frame = MobiusMap.affine(2.0 / spread, 0.0).compose(frame)
        return frame

    def frame_derivatives(self, frame: MobiusMap, points: Sequence[float]) -> np.ndarray:
        return np.array([frame.derivative(float(x)) for x in points])

    # ---- serialisation -------------------------------------------------------

    def driving_rows(self, driving: DrivingPath) -> List[Tuple[float, float]]:
        return [(float(t), float(w)) for t, w in zip(driving.times, driving.values)]

    def trace_rows(self, trace: CurveTrace) -> List[Tuple[float, float, float]]:
        return [(float(t), float(z.real), float(z.imag)) for t, z in zip(trace.times, trace.points)]

    @staticmethod
    def rotation_map(y: float) -> MobiusMap:
        """
        z -> (1 - y)/(1 - z): sends (y, 1, inf, 0) to (1, inf, 0, 1 - y).
        """
        if not y < 1.0:
            raise SLEValidationException("rotation map needs y < 1")
        return MobiusMap(a=0.0, b=1.0 - y, c=-1.0, d=1.0)
