"""
Green Service
Boundary Green's functions of chordal SLE: one-point hitting probabilities with their
log-log exponent, and the ordered multi-point function with two-radius extrapolation.
"""
from typing import Literal, Sequence

import numpy as np

from utils.log_utils import LogUtil
from utils.rng_utils import RngStreams
from utils.stats_utils import check_failure_rate, loglog_slope
from exceptions.sle_exception import SLEValidationException
from models.flow_batch import FlowOptions
from models.green_report import GreenOnePointReport, GreenOrderedReport
from services.exponent_service import ExponentService
from services.loewner_service import LoewnerService
from services.sle_flow_engine import FlowEngine

DEFAULT_GREEN_T_MAX = 25.0
RESOLUTION_FACTOR = 10.0


class GreenService:
    def __init__(
        self,
        log_util: LogUtil,
        flow_engine: FlowEngine,
        loewner_service: LoewnerService,
        exponent_service: ExponentService,
        block_size: int = 512,
    ):
        self.log_util = log_util
        self.flow_engine = flow_engine
        self.loewner_service = loewner_service
        self.exponent_service = exponent_service
        self.block_size = block_size

    def green_onepoint(
        self,
        kappa: float,
        x: float,
        radii: Sequence[float],
        n: int,
        seed: int,
        dt: float = 1e-3,
        t_max: float = DEFAULT_GREEN_T_MAX,
        delta_hit: float = 1e-3,
        distance: Literal["proxy", "exact"] = "proxy",
        stride: int = 1,
    ) -> GreenOnePointReport:
        """
        P(dist(eta, x) < r) for chordal SLE from 0 to infinity, computed in the frame
        where x = 1, and the least-squares slope of log P against log r.
        """
        if not 0.0 < kappa < 4.0:
            raise SLEValidationException(f"kappa={kappa} is outside the simple phase (0, 4)")
        radii = np.asarray(radii, dtype=float)
        if x == 0.0 or radii.size < 2 or np.any(np.diff(radii) >= 0.0):
            raise SLEValidationException("need x != 0 and at least two strictly decreasing radii")
        if radii[0] >= abs(x) / 2.0 or radii[-1] <= 0.0:
            raise SLEValidationException(f"radii must lie in (0, |x|/2) = (0, {abs(x) / 2.0})")
        scaled = radii / abs(x)
        if scaled[-1] < RESOLUTION_FACTOR * delta_hit:
            self.log_util.error(service_name="GreenService", message=f"Radius {radii[-1]} below the resolution of delta_hit={delta_hit}")
            raise SLEValidationException(f"smallest radius {radii[-1]} is below {RESOLUTION_FACTOR:g} delta_hit in the x = 1 frame")

        b2 = self.exponent_service.exponents(kappa).b2
        tracked = [1.0 if x > 0.0 else -1.0]
        options = FlowOptions(
            dt=dt,
            horizon=t_max,
            schedule="scaled",
            delta_hit=delta_hit,
            hit_radii=tuple(scaled),
            record_chains=distance == "exact",
        )
        batch = self.flow_engine.run(kappa, n, RngStreams(seed, self.block_size), options, tracked=tracked, watched=[0])
        rate = check_failure_rate(batch.flagged, f"green_onepoint x={x}")
        good = ~batch.flagged

        if distance == "exact":
            distances = np.full(n, np.inf)
            for i in np.flatnonzero(good):
                trace = self.loewner_service.chain_trace(batch.chains[i], stride=stride)
                distances[i] = self.loewner_service.trace_distance(trace, tracked[0])
            hits = distances[good, np.newaxis] < scaled[np.newaxis, :]
        else:
            # first_hit runs over increasing radii
            hits = np.isfinite(batch.first_hit[good, 0, ::-1])

        accepted = max(int(good.sum()), 1)
        probabilities = hits.sum(axis=0) / accepted
        stderrs = np.sqrt(probabilities * (1.0 - probabilities) / accepted)
        slope, slope_se, _ = loglog_slope(radii, probabilities, stderrs)
        self.log_util.info(service_name="GreenService", message=f"Green slope kappa={kappa} x={x}: {slope:.4f} +- {slope_se:.4f} (b2={b2:.4f}, {distance})")
        return GreenOnePointReport(
            kappa=kappa,
            x=x,
            radii=radii.tolist(),
            probabilities=probabilities.tolist(),
            stderrs=stderrs.tolist(),
            slope=slope,
            slope_stderr=slope_se,
            confidence_interval=[slope - 1.96 * slope_se, slope + 1.96 * slope_se],
            expected_slope=b2,
            distance=distance,
            n=n,
            failure_rate=rate,
        )

    def green_ordered(
        self,
        kappa: float,
        points: Sequence[float],
        r: float,
        n: int,
        seed: int,
        dt: float = 1e-3,
        t_max: float = DEFAULT_GREEN_T_MAX,
        delta_hit: float = 1e-3,
    ) -> GreenOrderedReport:
        """
        r^{-n b2} P(tau_r^{x_1} < ... < tau_r^{x_n} < inf) for chordal SLE from x_0, the
        points listed in the order the curve must approach them, at radii r and r/2.
        """
        if not 0.0 < kappa < 4.0:
            raise SLEValidationException(f"kappa={kappa} is outside the simple phase (0, 4)")
        x = np.asarray(points, dtype=float)
        if x.size < 2 or len(set(x.tolist())) != x.size:
            raise SLEValidationException("need a start point and at least one distinct target")
        targets = x[1:] - x[0]
        spread = float(np.max(np.abs(targets)))
        if not 0.0 < r < np.min(np.abs(targets)) / 2.0:
            raise SLEValidationException(f"radius {r} must lie in (0, half the smallest distance to the start)")
        scale = 1.0 / spread
        radii = (0.5 * r * scale, r * scale)
        if radii[0] < RESOLUTION_FACTOR * delta_hit:
            raise SLEValidationException(f"radius {r / 2} is below {RESOLUTION_FACTOR:g} delta_hit in the normalised frame")

        b2 = self.exponent_service.exponents(kappa).b2
        m = targets.size
        options = FlowOptions(dt=dt, horizon=t_max, schedule="scaled", delta_hit=delta_hit, hit_radii=radii)
        batch = self.flow_engine.run(
            kappa, n, RngStreams(seed, self.block_size), options,
            tracked=targets * scale,
            watched=range(m),
        )
        rate = check_failure_rate(batch.flagged, f"green_ordered {x.tolist()}")
        good = ~batch.flagged
        accepted = max(int(good.sum()), 1)

        estimates, stderrs, hits = {}, {}, {}
        for slot, (label, radius) in enumerate((("r/2", 0.5 * r), ("r", r))):
            times = batch.first_hit[good, :, slot]
            ordered = np.all(np.isfinite(times), axis=1)
            if m > 1:
                ordered &= np.all(np.diff(times, axis=1) > 0.0, axis=1)
            count = int(ordered.sum())
            p = count / accepted
            factor = radius ** (-m * b2)
            estimates[label] = factor * p
            stderrs[label] = factor * np.sqrt(p * (1.0 - p) / accepted)
            hits[label] = count

        flag = None
        if hits["r"] == 0 or hits["r/2"] == 0:
            flag = "no_hits"
            extrapolated, extrapolated_se, relative = 0.0, float("inf"), float("inf")
            self.log_util.warning(service_name="GreenService", message=f"No ordered hits at {x.tolist()} with r={r}")
        else:
            log_half = np.log(estimates["r/2"])
            log_full = np.log(estimates["r"])
            extrapolated = float(np.exp(2.0 * log_half - log_full))
            var = 4.0 * (stderrs["r/2"] / estimates["r/2"]) ** 2 + (stderrs["r"] / estimates["r"]) ** 2
            extrapolated_se = float(extrapolated * np.sqrt(var))
            relative = extrapolated_se / extrapolated
        self.log_util.info(service_name="GreenService", message=f"Ordered Green {x.tolist()} r={r}: {estimates} -> {extrapolated:.6g}")
        return GreenOrderedReport(
            kappa=kappa,
            points=x.tolist(),
            radius=r,
            estimates=estimates,
            stderrs=stderrs,
            hits=hits,
            extrapolated=extrapolated,
            extrapolated_stderr=extrapolated_se,
            relative_error=relative,
            flag=flag,
            n=n,
            failure_rate=rate,
        )
