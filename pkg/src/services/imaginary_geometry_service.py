"""
Imaginary Geometry Service
Flow lines of a Dirichlet field with piecewise constant boundary values, drawn one at
a time as SLE_kappa(rho) processes in the domain left by the curves already drawn.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.log_utils import LogUtil
from exceptions.sle_exception import SLENumericalException, SLEValidationException
from models.flow_batch import FlowOptions
from models.flow_line import FlowLine, FlowLineEnsemble
from models.force_config import ForceConfig
from models.loewner_data import CurveTrace, LoewnerChain
from services.exponent_service import ExponentService
from services.loewner_service import LoewnerService
from services.sampler_service import DEFAULT_T_MAX, SamplerService
from services.sle_flow_engine import FlowEngine


class ImaginaryGeometryService:
    def __init__(
        self,
        log_util: LogUtil,
        flow_engine: FlowEngine,
        loewner_service: LoewnerService,
        sampler_service: SamplerService,
        exponent_service: ExponentService,
    ):
        self.log_util = log_util
        self.flow_engine = flow_engine
        self.loewner_service = loewner_service
        self.sampler_service = sampler_service
        self.exponent_service = exponent_service

    def ig_rho(self, lambdas: Sequence[float], kappa: float) -> List[float]:
        """
        rho_i = (lambda_i - lambda_{i-1}) sqrt(kappa) / pi.
        """
        return (np.diff(np.asarray(lambdas, dtype=float)) * np.sqrt(kappa) / np.pi).tolist()

    def flow_line_forces(
        self,
        kappa: float,
        breakpoints: np.ndarray,
        values: Sequence[float],
        start: int,
        angle: float,
    ) -> ForceConfig:
        """
        Force data of the flow line of angle ``angle`` from breakpoints[start], in the frame
        where it starts at 0. values[k] is the boundary value left of breakpoints[k].
        """
        table = self.exponent_service.exponents(kappa)
        lam, chi = table.ig_lambda, table.chi
        triples: List[Tuple[float, str, float]] = [
            (0.0, "L", -(values[start] + angle * chi) / lam - 1.0),
            (0.0, "R", (values[start + 1] + angle * chi) / lam - 1.0),
        ]
        for k, position in enumerate(breakpoints):
            if k != start:
                triples.append((float(position), "L" if k < start else "R", (values[k + 1] - values[k]) / lam))
        return ForceConfig.build(triples)

    def sample_ig(
        self,
        kappa: float,
        points: Sequence[float],
        lambdas: Sequence[float],
        angles: Optional[Sequence[float]] = None,
        seed: int = 0,
        dt: float = 1e-3,
        t_max: float = DEFAULT_T_MAX,
        stride: int = 10,
    ) -> FlowLineEnsemble:
        """
        Draws the flow line from the rightmost start first. Given it, the rest of the
        field lives in its left component with boundary value -lambda - angle chi along the
        curve; that component is uniformised by the curve's truncated chain.
        """
        if not 0.0 < kappa < 4.0:
            raise SLEValidationException(f"kappa={kappa} is outside the simple phase (0, 4)")
        x = np.asarray(points, dtype=float)
        n = x.size
        angles = [0.0] * n if angles is None else [float(a) for a in angles]
        values = [float(v) for v in lambdas]
        if n == 0 or np.any(np.diff(x) <= 0.0):
            raise SLEValidationException(f"start points {x.tolist()} must be strictly increasing")
        if len(values) != n + 1 or len(angles) != n:
            raise SLEValidationException(f"{n} points need {n + 1} boundary values and {n} angles")
        table = self.exponent_service.exponents(kappa)
        streams = self.sampler_service.streams(seed)
        options = FlowOptions(dt=dt, horizon=t_max, schedule="scaled", record_chains=True)

        breakpoints = x.copy()
        starts = list(range(n))
        frames: List[Tuple[LoewnerChain, float, float]] = []
        lines: List[FlowLine] = []
        flag_reason = None
        for j in range(n - 1, -1, -1):
            k = starts.index(j)
            shift = breakpoints[k]
            relative = breakpoints - shift
            spread = np.max(np.abs(relative)) if breakpoints.size > 1 else 0.0
            scale = 2.0 / spread if spread > 0.0 else 1.0
            relative = relative * scale
            forces = self.flow_line_forces(kappa, relative, values, k, angles[j])
            if not forces.above_threshold():
                weights = [(p.side, p.position, round(p.weight, 6)) for p in forces.points]
                self.log_util.error(service_name="ImaginaryGeometryService", message=f"Flow line {j} violates the continuation threshold: {weights}")
                raise SLEValidationException(f"flow line from x_{j + 1} has force data {weights} below the continuation threshold")

            batch = self.flow_engine.run(
                kappa, 1, streams.child(j), options,
                forces=forces,
                watched=range(len(forces.points)),
            )
            away = np.array([p.position != 0.0 for p in forces.points], dtype=bool)
            if batch.flagged[0] or batch.collided[0, away].any():
                flag_reason = flag_reason or f"flow line {j} flagged"
            chain = batch.chains[0]
            sample = self.sampler_service.curve_sample(batch, 0, forces)
            trace = self._pull_back(self.loewner_service.chain_trace(chain, stride=stride), frames, shift, scale)
            lines.append(FlowLine(index=j, start=float(x[j]), angle=angles[j], forces=forces, sample=sample, trace=trace))

            column = {(p.side, p.position): c for c, p in enumerate(forces.points)}
            images = batch.images[0]
            kept = [images[column[("L", float(relative[i]))]] for i in range(k)]
            breakpoints = np.array(kept + [images[column[("L", 0.0)]]])
            values = values[: k + 1] + [-table.ig_lambda - angles[j] * table.chi]
            starts = starts[:k] + [-1]
            frames.append((chain, shift, scale))

        lines.sort(key=lambda line: line.index)
        self.log_util.info(service_name="ImaginaryGeometryService", message=f"Sampled {n} flow lines kappa={kappa} from {x.tolist()} (seed {seed})")
        return FlowLineEnsemble(
            kappa=kappa,
            points=x.tolist(),
            lambdas=[float(v) for v in lambdas],
            angles=angles,
            rho=self.ig_rho(lambdas, kappa),
            lines=lines,
            seed=seed,
            flagged=flag_reason is not None,
            flag_reason=flag_reason,
        )

    def _pull_back(self, trace: CurveTrace, frames: List[Tuple[LoewnerChain, float, float]], shift: float, scale: float) -> CurveTrace:
        w = trace.points / scale + shift
        for chain, previous_shift, previous_scale in reversed(frames):
            w = self.loewner_service.map_points_inverse(chain, w) / previous_scale + previous_shift
        finite = np.isfinite(w)
        if not finite.all():
            if not finite[0]:
                raise SLENumericalException("flow line start point lost while undoing earlier curves")
            cut = int(np.argmin(finite))
            return CurveTrace(times=trace.times[:cut], points=w[:cut], truncated=True, status="pullback_failure")
        return CurveTrace(times=trace.times, points=w, truncated=trace.truncated, status=trace.status)
