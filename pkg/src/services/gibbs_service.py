"""
Gibbs Service
Glauber dynamics for multiple SLE: each curve is redrawn as chordal SLE in the
complement of the others, which is uniformised by zipping the bounding curves.
"""
from typing import List, Optional, Tuple

import numpy as np

from utils.log_utils import LogUtil
from utils.rng_utils import RngStreams
from utils.stats_utils import mean_stderr
from exceptions.sle_exception import SLENumericalException, SLEValidationException
from models.flow_batch import FlowOptions
from models.gibbs_state import GibbsState, StationarityReport, SweepDrift
from models.link_pattern import LinkPattern
from models.loewner_data import CurveTrace, LoewnerChain, MobiusMap
from services.loewner_service import LoewnerService
from services.sle_flow_engine import FlowEngine

MAX_GIBBS_LINKS = 3
MAX_RETRIES = 2
DEFAULT_GIBBS_T_MAX = 25.0


def _orientation(p: np.ndarray, q: np.ndarray, r: np.ndarray) -> np.ndarray:
    return np.sign((q.real - p.real) * (r.imag - p.imag) - (q.imag - p.imag) * (r.real - p.real))


def polylines_cross(first: np.ndarray, second: np.ndarray) -> bool:
    """
    True when any segment of one polyline properly crosses or touches a segment of the other.
    """
    p1, p2 = first[:-1, np.newaxis], first[1:, np.newaxis]
    q1, q2 = second[np.newaxis, :-1], second[np.newaxis, 1:]
    d1 = _orientation(q1, q2, p1)
    d2 = _orientation(q1, q2, p2)
    d3 = _orientation(p1, p2, q1)
    d4 = _orientation(p1, p2, q2)
    return bool(np.any((d1 * d2 <= 0.0) & (d3 * d4 <= 0.0) & ~((d1 == 0) & (d2 == 0) & (d3 == 0) & (d4 == 0))))


class GibbsService:
    def __init__(self, log_util: LogUtil, flow_engine: FlowEngine, loewner_service: LoewnerService, block_size: int = 512):
        self.log_util = log_util
        self.flow_engine = flow_engine
        self.loewner_service = loewner_service
        self.block_size = block_size

    def gibbs_msle(
        self,
        kappa: float,
        alpha: LinkPattern,
        points,
        sweeps: int,
        seed: int,
        dt: float = 1e-3,
        t_max: float = DEFAULT_GIBBS_T_MAX,
        stride: int = 5,
        height: Optional[float] = None,
    ) -> GibbsState:
        if not 0.0 < kappa < 4.0:
            raise SLEValidationException(f"kappa={kappa} is outside the simple phase (0, 4)")
        if alpha.n_links > MAX_GIBBS_LINKS:
            raise SLEValidationException(f"Gibbs sampler supports N <= {MAX_GIBBS_LINKS}, got {alpha.n_links}")
        x = np.asarray(points, dtype=float)
        if x.size != 2 * alpha.n_links or np.any(np.diff(x) <= 0.0):
            raise SLEValidationException(f"need {2 * alpha.n_links} strictly increasing points")
        if sweeps < 1:
            raise SLEValidationException("need at least one sweep")
        height = 0.5 * float(np.min(np.diff(x))) if height is None else height
        if not height > 0.0:
            raise SLEValidationException(f"statistic height must be positive, got {height}")
        streams = RngStreams(seed, self.block_size)
        links = list(alpha.links)
        n_links = len(links)
        curves: List[Optional[CurveTrace]] = [None] * n_links
        counters = {"updates": 0, "flagged": 0, "retries": 0}

        # Outer links first
        depth = [sum(1 for c, d in links if c < a and b < d) for a, b in links]
        for k in sorted(range(n_links), key=lambda k: depth[k]):
            curve = self._update(kappa, links, x, curves, k, streams, 0, dt, t_max, stride, counters)
            if curve is None:
                raise SLENumericalException(f"could not initialise the curve of link {links[k]}")
            curves[k] = curve

        heights = np.zeros((sweeps, n_links))
        capacities = np.zeros((sweeps, n_links))
        for sweep in range(1, sweeps + 1):
            for k in range(n_links):
                curve = self._update(kappa, links, x, curves, k, streams, sweep, dt, t_max, stride, counters)
                if curve is not None:
                    curves[k] = curve
            self.check_configuration(curves)
            heights[sweep - 1] = [curve.max_height() for curve in curves]
            capacities[sweep - 1] = [self.capacity_at_height(curve, height) for curve in curves]

        state = GibbsState(
            kappa=kappa,
            pattern=alpha,
            points=x.tolist(),
            curves=curves,
            height=height,
            sweep_capacities=capacities,
            sweep_heights=heights,
            updates=counters["updates"],
            flagged_updates=counters["flagged"],
            retries=counters["retries"],
            seed=seed,
        )
        if state.flagged_updates:
            self.log_util.warning(service_name="GibbsService", message=f"{state.flagged_updates}/{state.updates} curve updates flagged after retries")
        self.log_util.info(service_name="GibbsService", message=f"Gibbs {alpha} kappa={kappa}: {sweeps} sweeps, {state.retries} retries, failure rate {state.failure_rate:.2%}")
        return state

    def capacity_at_height(self, curve: CurveTrace, height: float) -> float:
        """
        Half-plane capacity, seen from the start of the curve, of its initial piece up to
        the first vertex at height >= ``height``. A curve that stays lower counts whole.
        """
        points = curve.points - curve.points[0].real
        reached = np.flatnonzero(points.imag >= height)
        stop = int(reached[0]) + 1 if reached.size else points.size
        return self.loewner_service.refit_capacity(points[:stop]).capacity

    def stationarity_check(
        self,
        kappa: float,
        alpha: LinkPattern,
        points,
        chains: int,
        sweeps: int,
        burn_in: int,
        seed: int,
        link: int = 0,
        dt: float = 1e-3,
        t_max: float = DEFAULT_GIBBS_T_MAX,
        height: Optional[float] = None,
    ) -> StationarityReport:
        """
        Independent chains; the statistic at every sweep after burn-in is paired, chain by
        chain, with its value at the first sweep after burn-in.
        """
        if chains < 2 or not 0 <= burn_in < sweeps - 1:
            raise SLEValidationException(f"need chains >= 2 and burn_in < sweeps - 1, got chains={chains}, burn_in={burn_in}, sweeps={sweeps}")
        states = [self.gibbs_msle(kappa, alpha, points, sweeps, seed + c, dt, t_max, height=height) for c in range(chains)]
        stats = np.array([state.sweep_capacities[:, link] for state in states])
        reference = stats[:, burn_in]
        drifts = []
        for sweep in range(burn_in + 1, sweeps):
            difference, stderr = mean_stderr(stats[:, sweep] - reference)
            drifts.append(SweepDrift(sweep=sweep + 1, mean=float(stats[:, sweep].mean()), difference=difference, stderr=stderr))
        updates = sum(state.updates for state in states)
        report = StationarityReport(
            link=link,
            height=states[0].height,
            chains=chains,
            burn_in=burn_in,
            reference_mean=float(reference.mean()),
            drifts=drifts,
            failure_rate=sum(state.flagged_updates for state in states) / updates if updates else 0.0,
        )
        self.log_util.info(service_name="GibbsService", message=f"Stationarity of link {alpha.links[link]} over {chains} chains: max deviation {report.max_deviation:.2f} stderr")
        return report

    def check_configuration(self, curves: List[CurveTrace]):
        for i in range(len(curves)):
            for j in range(i + 1, len(curves)):
                if polylines_cross(curves[i].points, curves[j].points):
                    raise SLENumericalException(f"curves {i} and {j} intersect")

    # ---- one update ------------------------------------------------------------

    def _update(
        self,
        kappa: float,
        links: List[Tuple[int, int]],
        x: np.ndarray,
        curves: List[Optional[CurveTrace]],
        k: int,
        streams: RngStreams,
        sweep: int,
        dt: float,
        t_max: float,
        stride: int,
        counters: dict,
    ) -> Optional[CurveTrace]:
        counters["updates"] += 1
        for attempt in range(MAX_RETRIES + 1):
            tag = (sweep * 8 + k) * 4 + attempt
            try:
                curve = self._draw(kappa, links, x, curves, k, streams.child(tag), dt / 2 ** attempt, t_max, stride)
            except (FloatingPointError, ValueError) as error:
                self.log_util.debug(service_name="GibbsService", message=f"Uniformisation failed for link {links[k]}: {error}")
                curve = None
            others = [c for i, c in enumerate(curves) if i != k and c is not None]
            if curve is not None and not any(polylines_cross(curve.points, other.points) for other in others):
                return curve
            counters["retries"] += 1
        counters["flagged"] += 1
        self.log_util.warning(service_name="GibbsService", message=f"Link {links[k]} kept its previous curve in sweep {sweep}")
        return None

    def _draw(
        self,
        kappa: float,
        links: List[Tuple[int, int]],
        x: np.ndarray,
        curves: List[Optional[CurveTrace]],
        k: int,
        streams: RngStreams,
        dt: float,
        t_max: float,
        stride: int,
    ) -> Optional[CurveTrace]:
        a, b = links[k]
        inside = lambda outer, inner: links[outer][0] < links[inner][0] and links[inner][1] < links[outer][1]

        ends = np.array([x[a - 1], x[b - 1]], dtype=complex)
        pending = {i: curves[i].points.copy() for i in range(len(links)) if i != k and curves[i] is not None}
        maps: List[Tuple[MobiusMap, LoewnerChain]] = []
        while pending:
            i = min(pending)
            polyline = pending.pop(i)
            start, stop = polyline[0].real, polyline[-1].real
            frame = self.loewner_service.mobius_frame(start, stop)
            with np.errstate(divide="ignore", invalid="ignore"):
                framed = frame(polyline[:-1])
            framed[0] = 0.0
            chain = self.loewner_service.refit_capacity(framed)
            maps.append((frame, chain))
            ends = self.loewner_service.map_points_forward(chain, frame(ends))
            # Curves across this one bound a different component
            side = inside(i, k)
            for j in list(pending):
                if inside(i, j) != side:
                    del pending[j]
                    continue
                pending[j] = self.loewner_service.map_points_forward(chain, frame(pending[j]))

        if not np.all(np.isfinite(ends)):
            return None
        left, right = ends.real
        target = self.loewner_service.mobius_frame(left, right)
        options = FlowOptions(dt=dt, horizon=t_max, schedule="scaled", record_chains=True)
        batch = self.flow_engine.run(kappa, 1, streams, options)
        if batch.flagged[0]:
            return None
        trace = self.loewner_service.chain_trace(batch.chains[0], stride=stride)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = target.inverse()(trace.points)
            for frame, chain in reversed(maps):
                z = frame.inverse()(self.loewner_service.map_points_inverse(chain, z))
        if not np.all(np.isfinite(z)) or trace.truncated:
            return None
        z[0] = x[a - 1]
        z = np.append(z, x[b - 1])
        z = z.real + 1j * np.maximum(z.imag, 0.0)
        times = np.append(trace.times, trace.times[-1])
        return CurveTrace(times=times, points=z)
