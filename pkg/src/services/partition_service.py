"""
Partition Service
Pure partition functions Z_alpha by the outermost-link recursion, the PDE and
conformal-covariance checkers, and the imaginary-geometry partition function.
"""
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from utils.log_utils import LogUtil
from utils.rng_utils import RngStreams
from utils.stats_utils import check_failure_rate, mean_stderr, paired_ratio
from exceptions.sle_exception import SLEBudgetException, SLEValidationException
from models.flow_batch import FlowOptions
from models.link_pattern import LinkPattern
from models.loewner_data import MobiusMap, is_infinite
from models.partition_estimate import CovarianceReport, PartitionEstimate, PdeReport, PdeResidual
from services.exponent_service import ExponentService
from services.loewner_service import LoewnerService
from services.pattern_service import PatternService
from services.sle_flow_engine import FlowEngine

MAX_Z_LINKS = 4
DEFAULT_Z_T_MAX = 25.0

Evaluator = Callable[[Sequence[float]], np.ndarray]


class PartitionService:
    """
    Z_alpha(x) = H(x_1, x_j)^b E[Z_{alpha^L}(inside images) Z_{alpha^R}(outside images)],
    where (1, j) is the link of the first point and the expectation is over chordal
    SLE from x_1 to x_j.
    """

    def __init__(
        self,
        log_util: LogUtil,
        flow_engine: FlowEngine,
        exponent_service: ExponentService,
        pattern_service: PatternService,
        loewner_service: LoewnerService,
        block_size: int = 512,
    ):
        self.log_util = log_util
        self.flow_engine = flow_engine
        self.loewner_service = loewner_service
        self.exponent_service = exponent_service
        self.pattern_service = pattern_service
        self.block_size = block_size

    def estimate_Z(
        self,
        kappa: float,
        alpha: LinkPattern,
        points: Sequence[float],
        n: int,
        seed: int,
        dt: float = 1e-3,
        t_max: float = DEFAULT_Z_T_MAX,
    ) -> PartitionEstimate:
        if not 0.0 < kappa < 4.0:
            raise SLEValidationException(f"kappa={kappa} is outside the simple phase (0, 4)")
        if alpha.n_links > MAX_Z_LINKS:
            self.log_util.error(service_name="PartitionService", message=f"Refusing Z_alpha with N={alpha.n_links}")
            raise SLEBudgetException(f"N={alpha.n_links} exceeds the recursion guard N <= {MAX_Z_LINKS}")
        x = np.asarray(points, dtype=float)
        if x.size != 2 * alpha.n_links or np.any(np.diff(x) <= 0.0):
            raise SLEValidationException(f"need {2 * alpha.n_links} strictly increasing points, got {list(points)}")
        options = FlowOptions(dt=dt, horizon=t_max, schedule="scaled")
        streams = RngStreams(seed=seed, block_size=self.block_size)
        draws, bad = self._z_draws(kappa, alpha, np.tile(x, (n, 1)), streams, options)
        rate = check_failure_rate(bad, f"Z_alpha {alpha}")
        draws = np.where(bad, 0.0, draws)
        value, stderr = mean_stderr(draws)
        if alpha.n_links == 1:
            stderr = 0.0
        self.log_util.info(service_name="PartitionService", message=f"Z({alpha}) at {x.tolist()}: {value:.6g} +- {stderr:.2g} (n={n}, failure rate {rate:.3%})")
        return PartitionEstimate(
            value=value,
            stderr=stderr,
            n=n,
            depth=alpha.n_links,
            failure_rate=rate,
            frame={"alpha": str(alpha), "points": x.tolist(), "link": [1, alpha.partner(1)]},
            draws=draws,
        )

    def _z_draws(
        self,
        kappa: float,
        alpha: Optional[LinkPattern],
        x: np.ndarray,
        streams: RngStreams,
        options: FlowOptions,
    ) -> Tuple[np.ndarray, np.ndarray]:
        n = x.shape[0]
        if alpha is None:
            return np.ones(n), np.zeros(n, dtype=bool)
        b = (6.0 - kappa) / (2.0 * kappa)
        if alpha.n_links == 1:
            return (x[:, 1] - x[:, 0]) ** (-2.0 * b), np.zeros(n, dtype=bool)

        j = alpha.partner(1)
        others = [k for k in range(x.shape[1]) if k not in (0, j - 1)]
        y, log_derivs = self._link_frame(x, j, others)
        gap = x[:, j - 1] - x[:, 0]
        log_prefactor = b * (log_derivs.sum(axis=1) - 2.0 * np.log(gap))

        batch = self.flow_engine.run(kappa, n, streams, options, tracked=y, watched=range(len(others)))
        bad = batch.flagged | batch.collided.any(axis=1)
        log_weight = log_prefactor + b * batch.logderivs.sum(axis=1)

        inside = [slot for slot, k in enumerate(others) if k < j - 1]
        outside = [slot for slot, k in enumerate(others) if k > j - 1]
        inner, outer = self.pattern_service.lp_split(alpha, (1, j))
        child_draws = np.ones(n)
        for tag, (pattern, slots) in enumerate(((inner, inside), (outer, outside)), start=1):
            if pattern is None:
                continue
            images = batch.images[:, slots]
            images[bad] = np.arange(len(slots), dtype=float)
            draws, child_bad = self._z_draws(kappa, pattern, images, streams.child(tag), options)
            child_draws = child_draws * draws
            bad = bad | child_bad
        with np.errstate(invalid="ignore", over="ignore"):
            result = np.where(bad, 0.0, np.exp(np.where(bad, 0.0, log_weight)) * child_draws)
        return result, bad

    def _link_frame(self, x: np.ndarray, j: int, others: List[int]) -> Tuple[np.ndarray, np.ndarray]:
        """
        Images and log-derivatives of the remaining points under the frame sending
        (x_1, x_j) to (0, inf), one frame per distinct row of ``x``.
        """
        rows, inverse = np.unique(x, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        images = np.empty((rows.shape[0], len(others)))
        log_derivs = np.empty_like(images)
        for r, row in enumerate(rows):
            rest = row[others].tolist()
            frame = self.loewner_service.mobius_frame(float(row[0]), float(row[j - 1]), rest)
            images[r] = [frame(v) for v in rest]
            log_derivs[r] = np.log(self.loewner_service.frame_derivatives(frame, rest))
        return images[inverse], log_derivs[inverse]

    # ---- evaluators ------------------------------------------------------------

    def exact_single_link(self, kappa: float) -> Evaluator:
        b = self.exponent_service.exponents(kappa).b

        def evaluate(points: Sequence[float]) -> np.ndarray:
            x, y = float(points[0]), float(points[1])
            return np.array([(y - x) ** (-2.0 * b)])

        return evaluate

    def z_evaluator(self, kappa: float, alpha: LinkPattern, n: int, seed: int, dt: float = 1e-3, t_max: float = DEFAULT_Z_T_MAX) -> Evaluator:
        """
        Per-sample draws of estimate_Z with a fixed seed, so every call shares its random numbers.
        """
        def evaluate(points: Sequence[float]) -> np.ndarray:
            return self.estimate_Z(kappa, alpha, points, n, seed, dt, t_max).draws

        return evaluate

    # ---- checkers ----------------------------------------------------------------

    def check_pde(self, kappa: float, evaluator: Evaluator, points: Sequence[float], h: Optional[float] = None) -> PdeReport:
        """
        Central differences of kappa/2 d_i^2 + sum_{j != i} (2/(x_j - x_i) d_j - 2b/(x_j - x_i)^2)
        applied to Z, per sample.
        """
        b = self.exponent_service.exponents(kappa).b
        x = np.asarray(points, dtype=float)
        if np.any(np.diff(x) <= 0.0):
            raise SLEValidationException(f"points {x.tolist()} must be strictly increasing")
        min_gap = float(np.min(np.diff(x))) if x.size > 1 else 1.0
        h = 0.05 * min_gap if h is None else h
        if not 0.0 < h < 0.5 * min_gap:
            raise SLEValidationException(f"step h={h} leaves the ordered chamber (min gap {min_gap})")

        centre = np.asarray(evaluator(x), dtype=float)
        plus, minus = [], []
        for k in range(x.size):
            shift = np.zeros_like(x)
            shift[k] = h
            plus.append(np.asarray(evaluator(x + shift), dtype=float))
            minus.append(np.asarray(evaluator(x - shift), dtype=float))

        residuals = []
        for i in range(x.size):
            per_sample = 0.5 * kappa * (plus[i] - 2.0 * centre + minus[i]) / h ** 2
            for j in range(x.size):
                if j == i:
                    continue
                gap = x[j] - x[i]
                per_sample = per_sample + 2.0 / gap * (plus[j] - minus[j]) / (2.0 * h) - 2.0 * b / gap ** 2 * centre
            residual, stderr = mean_stderr(per_sample)
            residuals.append(PdeResidual(coordinate=i, residual=residual, stderr=stderr if per_sample.size > 1 else 0.0))
        report = PdeReport(points=x.tolist(), h=h, value=float(centre.mean()), residuals=residuals)
        self.log_util.info(service_name="PartitionService", message=f"PDE residuals at {x.tolist()} (h={h:.3g}): {[round(r.residual, 6) for r in residuals]}")
        return report

    def check_covariance(self, kappa: float, evaluator: Evaluator, points: Sequence[float], mobius: MobiusMap) -> CovarianceReport:
        b = self.exponent_service.exponents(kappa).b
        x = np.asarray(points, dtype=float)
        mapped = np.array([mobius(float(v)) for v in x])
        if any(is_infinite(v) for v in mapped) or np.any(np.diff(mapped) <= 0.0):
            raise SLEValidationException(f"mapped points {mapped.tolist()} are not finite and ordered")
        factor = np.prod([mobius.derivative(float(v)) ** b for v in x])
        left = np.asarray(evaluator(x), dtype=float)
        right = factor * np.asarray(evaluator(mapped), dtype=float)
        if left.size == 1:
            ratio, stderr = float(left[0] / right[0]), 0.0
        else:
            ratio, stderr = paired_ratio(left, right)
        self.log_util.info(service_name="PartitionService", message=f"Covariance ratio at {x.tolist()}: {ratio:.6g} +- {stderr:.2g}")
        return CovarianceReport(
            points=x.tolist(),
            mapped_points=mapped.tolist(),
            ratio=ratio,
            stderr=stderr,
            map_coefficients=(mobius.a, mobius.b, mobius.c, mobius.d),
        )

    # ---- imaginary geometry ------------------------------------------------------

    def ig_partition(self, points: Sequence[float], rho: Sequence[float], kappa: float) -> float:
        x = np.asarray(points, dtype=float)
        rho = np.asarray(rho, dtype=float)
        if x.size != rho.size:
            raise SLEValidationException(f"{x.size} points but {rho.size} weights")
        if np.any(np.diff(x) <= 0.0):
            raise SLEValidationException(f"points {x.tolist()} must be strictly increasing")
        i, j = np.triu_indices(x.size, k=1)
        return float(np.exp(np.sum(rho[i] * rho[j] / (2.0 * kappa) * np.log(x[j] - x[i]))))

    def ig_partition_from_lambda(self, points: Sequence[float], lambdas: Sequence[float], kappa: float) -> float:
        lambdas = np.asarray(lambdas, dtype=float)
        rho = np.diff(lambdas) * np.sqrt(kappa) / np.pi
        return self.ig_partition(points, rho, kappa)
