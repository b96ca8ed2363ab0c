"""
Sampler Service
SLE_kappa and SLE_kappa(rho) samplers, target-hitting stages, and the recursive
Green's-function measures M_alpha and M(rho; x) together with the two-curve measure m_x.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.log_utils import LogUtil
from utils.rng_utils import RngStreams
from utils.stats_utils import check_failure_rate, effective_sample_size, ks_two_sample, paired_ratio, weighted_resample
from exceptions.sle_exception import SLENumericalException, SLEValidationException
from models.curve_sample import CurveSample, WeightedEnsemble
from models.flow_batch import FLAG_NAMES, FlowBatch, FlowOptions
from models.green_report import MxReversalReport
from models.force_config import ForceConfig
from models.link_pattern import CurveLinkPattern
from models.loewner_data import CurveTrace, LoewnerChain, MobiusMap
from models.partition_estimate import CovarianceReport, PartitionEstimate
from services.exponent_service import ExponentService
from services.loewner_service import LoewnerService
from services.pattern_service import PatternService
from services.sle_flow_engine import FlowEngine, Monitor

DEFAULT_T_MAX = 25.0
# Runs that must reach a target point
DEFAULT_TARGET_T_MAX = 1e4


class SamplerService:
    """
    Service for sampling SLE-type curves. Every sampler is a pure function of its
    parameters and seed.
    """

    def __init__(
        self,
        log_util: LogUtil,
        flow_engine: FlowEngine,
        loewner_service: LoewnerService,
        exponent_service: ExponentService,
        pattern_service: PatternService,
        block_size: int = 512,
    ):
        self.log_util = log_util
        self.flow_engine = flow_engine
        self.loewner_service = loewner_service
        self.exponent_service = exponent_service
        self.pattern_service = pattern_service
        self.block_size = block_size

    def streams(self, seed: int) -> RngStreams:
        return RngStreams(seed=seed, block_size=self.block_size)

    # ---- plain and forced SLE --------------------------------------------------

    def sample_sle(self, kappa: float, horizon: float, dt: float, seed: int) -> CurveSample:
        return self.sample_sle_rho(kappa, ForceConfig(), horizon, dt, seed)

    def sample_sle_batch(
        self,
        kappa: float,
        n: int,
        horizon: float,
        dt: float,
        seed: int,
        checkpoints: Sequence[float] = (),
        tracked: Optional[Sequence[float]] = None,
        record_chains: bool = False,
    ) -> FlowBatch:
        return self.sample_sle_rho_batch(kappa, ForceConfig(), n, horizon, dt, seed, tracked, checkpoints, record_chains)

    def sample_sle_rho(
        self,
        kappa: float,
        forces: ForceConfig,
        horizon: float,
        dt: float,
        seed: int,
        tracked: Optional[Sequence[float]] = None,
    ) -> CurveSample:
        batch = self.sample_sle_rho_batch(kappa, forces, 1, horizon, dt, seed, tracked, record_chains=True)
        return self.curve_sample(batch, 0, forces)

    def sample_sle_rho_batch(
        self,
        kappa: float,
        forces: ForceConfig,
        n: int,
        horizon: float,
        dt: float,
        seed: int,
        tracked: Optional[Sequence[float]] = None,
        checkpoints: Sequence[float] = (),
        record_chains: bool = False,
        monitor: Optional[Monitor] = None,
        watched: Sequence[int] = (),
    ) -> FlowBatch:
        options = FlowOptions(dt=dt, horizon=horizon, checkpoints=tuple(checkpoints), record_chains=record_chains)
        return self.flow_engine.run(
            kappa, n, self.streams(seed), options,
            forces=forces,
            tracked=None if tracked is None else np.asarray(tracked, dtype=float),
            monitor=monitor,
            watched=watched,
        )

    def sample_to_target(
        self,
        kappa: float,
        forces: ForceConfig,
        target: int,
        seed: int,
        delta_hit: float = 1e-3,
        tracked: Optional[Sequence[float]] = None,
        dt: float = 1e-3,
        t_max: float = DEFAULT_TARGET_T_MAX,
    ) -> CurveSample:
        batch = self.sample_to_target_batch(kappa, forces, target, 1, seed, delta_hit, tracked, dt, t_max, record_chains=True)
        return self.curve_sample(batch, 0, forces)

    def sample_to_target_batch(
        self,
        kappa: float,
        forces: ForceConfig,
        target: int,
        n: int,
        seed: int,
        delta_hit: float = 1e-3,
        tracked: Optional[Sequence[float]] = None,
        dt: float = 1e-3,
        t_max: float = DEFAULT_TARGET_T_MAX,
        record_chains: bool = False,
    ) -> FlowBatch:
        """
        Runs until W comes within delta_hit of the target force point (index into
        forces.points). Every other tracked point is watched.
        """
        if not 0 <= target < len(forces.points):
            raise SLEValidationException(f"target {target} is not a force point")
        tracked = None if tracked is None else np.asarray(tracked, dtype=float)
        p = len(forces.points) + (0 if tracked is None else tracked.shape[-1])
        options = self.target_options(dt, t_max, delta_hit, record_chains)
        return self.flow_engine.run(
            kappa, n, self.streams(seed), options,
            forces=forces,
            tracked=tracked,
            target=target,
            watched=[j for j in range(p) if j != target],
        )

    def target_options(self, dt: float, t_max: float, delta_hit: float, record_chains: bool = False) -> FlowOptions:
        return FlowOptions(dt=dt, horizon=t_max, schedule="scaled", delta_hit=delta_hit, record_chains=record_chains)

    def curve_sample(self, batch: FlowBatch, lane: int, forces: ForceConfig) -> CurveSample:
        chain = batch.chains[lane] if batch.chains is not None else LoewnerChain()
        positions = batch.positions[lane]
        flag = int(batch.flags[lane])
        return CurveSample(
            driving=chain.to_driving_path(batch.kappa),
            chain=chain,
            forces=forces,
            tracked_points=positions,
            trajectories=self.replay_trajectories(chain, positions, batch.sides),
            final_images=batch.images[lane],
            final_logderivs=batch.logderivs[lane],
            threshold_time=float(batch.event_time[lane]) if batch.threshold[lane] else None,
            hit_time=float(batch.event_time[lane]) if batch.hit[lane] else None,
            hit_index=int(batch.event_index[lane]) if batch.hit[lane] else None,
            flagged=flag != 0,
            flag_reason=FLAG_NAMES.get(flag),
        )

    def replay_trajectories(self, chain: LoewnerChain, positions: np.ndarray, sides: np.ndarray, epsilon: float = 1e-6) -> np.ndarray:
        """
        Centred images of the tracked points after every step; crossings restart at 2 sqrt(dt).
        """
        f = np.where(positions == 0.0, sides * epsilon, positions).astype(float)
        rows = [f.copy()]
        for dt, dw in zip(chain.dt, chain.dw):
            u = f - dw
            f = np.where(np.sign(u) != sides, sides * 2.0 * np.sqrt(dt), sides * np.sqrt(u * u + 4.0 * dt))
            rows.append(f.copy())
        return np.array(rows).reshape(len(rows), positions.size)

    # ---- recursive Green's function measure M_alpha -----------------------------

    def sample_m_alpha(
        self,
        kappa: float,
        alpha: CurveLinkPattern,
        points: Sequence[float],
        n: int,
        seed: int,
        dt: float = 1e-3,
        t_max: float = DEFAULT_TARGET_T_MAX,
        delta_hit: float = 1e-3,
        normalize: bool = True,
    ) -> Tuple[WeightedEnsemble, PartitionEstimate]:
        """
        Total mass G_alpha of M_alpha by weight streaming: each outer draw carries one
        inner draw per level, which keeps the estimator unbiased for the mean.
        """
        self._check_simple_phase(kappa)
        x = np.asarray(points, dtype=float)
        if x.size != alpha.n or np.any(np.diff(x) <= 0.0):
            raise SLEValidationException(f"need {alpha.n} strictly increasing points, got {list(points)}")
        options = self.target_options(dt, t_max, delta_hit)
        draws, flagged = self._m_alpha_draws(kappa, alpha, np.tile(x, (n, 1)), self.streams(seed), options, normalize)
        rate = check_failure_rate(flagged, f"M_alpha {alpha}")
        ensemble = WeightedEnsemble(
            weights=np.where(flagged, 0.0, draws),
            flags=flagged,
            seed=seed,
            depth=alpha.n - 1,
            params={"kappa": kappa, "alpha": str(alpha), "points": x.tolist(), "normalize": normalize},
        )
        value, stderr = ensemble.total_mass()
        self.log_util.info(service_name="SamplerService", message=f"G_alpha({alpha}) at {x.tolist()}: {value:.6g} +- {stderr:.2g} (n={n}, failure rate {rate:.3%})")
        estimate = PartitionEstimate(
            value=value,
            stderr=stderr,
            n=n,
            depth=alpha.n - 1,
            failure_rate=rate,
            frame={"alpha": str(alpha), "points": x.tolist()},
            draws=ensemble.weights,
        )
        return ensemble, estimate

    def _m_alpha_draws(
        self,
        kappa: float,
        alpha: CurveLinkPattern,
        x: np.ndarray,
        streams: RngStreams,
        options: FlowOptions,
        normalize: bool,
    ) -> Tuple[np.ndarray, np.ndarray]:
        n, size = x.shape
        b2 = 8.0 / kappa - 1.0
        i0, i1 = alpha.order[0], alpha.order[1]
        if size == 2:
            return np.abs(x[:, i1] - x[:, i0]) ** (-b2), np.zeros(n, dtype=bool)

        y = x - x[:, [i0]]
        scale = np.ones(n)
        if normalize:
            # G_alpha(s y) = s^{-(N-1) b2} G_alpha(y)
            scale = 2.0 / np.max(np.abs(y), axis=1)
            y = y * scale[:, np.newaxis]
        others = [k for k in range(size) if k not in (i0, i1)]
        side = "R" if i1 > i0 else "L"
        forces = ForceConfig.build([(y[0, i1], side, kappa - 8.0)])
        batch = self.flow_engine.run(
            kappa, n, streams, options,
            forces=forces,
            tracked=y[:, others],
            target=0,
            watched=range(1, size - 1),
            force_positions=y[:, [i1]],
        )
        bad = batch.flagged | ~batch.hit | batch.collided[:, 1:].any(axis=1)
        with np.errstate(invalid="ignore", over="ignore"):
            log_weight = -b2 * np.log(np.abs(y[:, i1])) + b2 * batch.logderivs[:, 1:].sum(axis=1)

        # Remaining points keep their line order; the target itself sits at 0
        remaining = [k for k in range(size) if k != i0]
        images = np.zeros((n, size - 1))
        for slot, k in enumerate(remaining):
            if k != i1:
                images[:, slot] = batch.images[:, 1 + others.index(k)]
        images[bad] = np.arange(size - 1, dtype=float)

        child = self.pattern_service.clp_drop_first(alpha)
        child_draws, child_bad = self._m_alpha_draws(kappa, child, images, streams.child(1), options, normalize)
        bad = bad | child_bad
        with np.errstate(invalid="ignore", over="ignore"):
            draws = np.where(bad, 0.0, np.exp(np.where(bad, 0.0, log_weight)) * child_draws)
        return draws * scale ** ((size - 1) * b2), bad

    def green_dilation(
        self,
        kappa: float,
        alpha: CurveLinkPattern,
        points: Sequence[float],
        scale: float,
        n: int,
        seed: int,
        dt: float = 1e-3,
        t_max: float = DEFAULT_TARGET_T_MAX,
        delta_hit: float = 1e-3,
    ) -> CovarianceReport:
        """
        G_alpha(x) / (s^{-(N-1) b2} G_alpha(s x)) with common random numbers; the raw
        (unnormalised) recursion runs at both scales so the ratio is a genuine check.
        """
        if scale <= 0.0:
            raise SLEValidationException(f"scale {scale} must be positive")
        x = np.asarray(points, dtype=float)
        b2 = self.exponent_service.exponents(kappa).b2
        _, base = self.sample_m_alpha(kappa, alpha, x, n, seed, dt, t_max, delta_hit, normalize=False)
        _, dilated = self.sample_m_alpha(kappa, alpha, scale * x, n, seed, dt * scale ** 2, t_max * scale ** 2, delta_hit * scale, normalize=False)
        factor = scale ** ((alpha.n - 1) * b2)
        ratio, stderr = paired_ratio(base.draws, factor * dilated.draws)
        self.log_util.info(service_name="SamplerService", message=f"Green dilation {alpha} by {scale}: ratio {ratio:.4f} +- {stderr:.2g}")
        return CovarianceReport(
            points=x.tolist(),
            mapped_points=(scale * x).tolist(),
            ratio=ratio,
            stderr=stderr,
            map_coefficients=(scale, 0.0, 0.0, 1.0),
        )

    # ---- M(rho; x) --------------------------------------------------------------

    def sample_m_rho(
        self,
        kappa: float,
        rho: float,
        x: float,
        n: int,
        seed: int,
        dt: float = 1e-3,
        t_max: float = DEFAULT_TARGET_T_MAX,
        delta_hit: float = 1e-3,
        record: bool = False,
    ) -> WeightedEnsemble:
        """
        Three stages: SLE_kappa(rho, kappa-8-2rho) from 0 with force points 0^+, 1 run to
        hit 1 and weighted by f'(x)^{b_rho} (f(x) - f(1))^{-b_rho}; the same process from
        the image of 1 with force points 1^+, x run to hit x; SLE_kappa(rho) from x with
        force point x^+ to infinity.
        """
        self._check_simple_phase(kappa)
        if not rho > -2.0 or not x > 1.0:
            raise SLEValidationException(f"need rho > -2 and x > 1, got rho={rho}, x={x}")
        b_rho = self.exponent_service.exponents(kappa).b_rho(rho)
        streams = self.streams(seed)
        options = self.target_options(dt, t_max, delta_hit, record)
        far = kappa - 8.0 - 2.0 * rho

        first_forces = ForceConfig.build([(0.0, "R", rho), (1.0, "R", far)])
        first = self.flow_engine.run(kappa, n, streams, options, forces=first_forces, tracked=[x], target=1, watched=[2])
        bad = first.flagged | ~first.hit | first.collided[:, 2]
        with np.errstate(invalid="ignore", divide="ignore"):
            log_weight = b_rho * (first.logderivs[:, 2] - np.log(first.images[:, 2] - first.images[:, 1]))

        # stage two starts at f(1), so x sits at f(x) - f(1)
        x_image = np.where(bad, 1.0, first.images[:, 2] - first.images[:, 1])
        second_forces = ForceConfig.build([(0.0, "R", rho), (1.0, "R", far)])
        second = self.flow_engine.run(
            kappa, n, streams.child(1), options,
            forces=second_forces,
            target=1,
            force_positions=np.column_stack([np.zeros(n), x_image]),
        )
        bad |= second.flagged | ~second.hit

        third_forces = ForceConfig.build([(0.0, "R", rho)])
        third_options = FlowOptions(dt=dt, horizon=t_max, schedule="scaled", record_chains=record)
        third = self.flow_engine.run(kappa, n, streams.child(2), third_options, forces=third_forces)
        bad |= third.flagged

        rate = check_failure_rate(bad, f"M(rho={rho}; x={x})")
        weights = np.where(bad, 0.0, np.exp(np.where(bad, 0.0, log_weight)))
        bundles = None
        if record:
            bundles = [
                [self.curve_sample(first, i, first_forces), self.curve_sample(second, i, second_forces), self.curve_sample(third, i, third_forces)]
                for i in range(n)
            ]
        self.log_util.info(service_name="SamplerService", message=f"M(rho={rho}; x={x}) kappa={kappa}: n={n}, failure rate {rate:.3%}")
        return WeightedEnsemble(
            weights=weights,
            flags=bad,
            features={"first_hit_time": first.event_time, "second_hit_time": second.event_time, "third_W": third.W},
            bundles=bundles,
            seed=seed,
            depth=3,
            params={"kappa": kappa, "rho": rho, "x": x, "b_rho": b_rho},
        )

    # ---- two-curve measure m_x ----------------------------------------------------

    def sample_m_x(
        self,
        kappa: float,
        w1: float,
        w2: float,
        x: float,
        n: int,
        seed: int,
        dt: float = 1e-3,
        t_max: float = DEFAULT_T_MAX,
        traces: bool = False,
        stride: int = 10,
        streams: Optional[RngStreams] = None,
    ) -> WeightedEnsemble:
        """
        eta_1 is SLE_kappa(W_1 - 2) from 0 to infinity with force point 0^-, weighted by
        H(x, 1)^{b_1} in its complement; eta_2 is SLE_kappa(W_2 - 2) from x to 1 with force
        point x^+, sampled in the frame psi(z) = (z - f(x)) / (f(1) - z).
        """
        self._check_simple_phase(kappa)
        if not (w1 > 0.0 and w2 > 0.0 and 0.0 < x < 1.0):
            raise SLEValidationException(f"need W1, W2 > 0 and x in (0, 1), got {w1}, {w2}, {x}")
        b1 = self.exponent_service.exponents(kappa).b_weight(w1)
        streams = self.streams(seed) if streams is None else streams
        options = FlowOptions(dt=dt, horizon=t_max, schedule="scaled", record_chains=traces)

        first_forces = ForceConfig.build([(0.0, "L", w1 - 2.0)])
        first = self.flow_engine.run(kappa, n, streams, options, forces=first_forces, tracked=[x, 1.0], watched=[1, 2])
        u, v = first.images[:, 1], first.images[:, 2]
        bad = first.flagged | first.collided[:, 1:].any(axis=1) | (first.event_index >= 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            log_h = first.logderivs[:, 1] + first.logderivs[:, 2] - 2.0 * np.log(v - u)

        second_forces = ForceConfig.build([(0.0, "R", w2 - 2.0)])
        second = self.flow_engine.run(kappa, n, streams.child(1), options, forces=second_forces)
        bad |= second.flagged | (second.event_index >= 0)

        rate = check_failure_rate(bad, f"m_x(W1={w1}, W2={w2}; x={x})")
        weights = np.where(bad, 0.0, np.exp(np.where(bad, 0.0, b1 * log_h)))
        features = {"H": np.exp(log_h), "u": u, "v": v}
        bundles = None
        if traces:
            direct = np.zeros(n)
            reversed_ = np.zeros(n)
            for i in np.flatnonzero(~bad):
                direct[i], reversed_[i] = self.bundle_summary(first.chains[i], second.chains[i], u[i], v[i], x, stride)
            features["direct_distance"] = direct
            features["reversed_distance"] = reversed_
            bundles = [[self.curve_sample(first, i, first_forces), self.curve_sample(second, i, second_forces)] for i in range(n)]
        self.log_util.info(service_name="SamplerService", message=f"m_x(W1={w1}, W2={w2}; x={x}) kappa={kappa}: n={n}, failure rate {rate:.3%}")
        return WeightedEnsemble(
            weights=weights,
            flags=bad,
            features=features,
            bundles=bundles,
            seed=seed,
            depth=2,
            params={"kappa": kappa, "W1": w1, "W2": w2, "x": x, "b1": b1},
        )

    def m_x_reversal_check(
        self,
        kappa: float,
        w1: float,
        w2: float,
        x: float,
        n: int,
        seed: int,
        dt: float = 1e-3,
        t_max: float = DEFAULT_T_MAX,
        stride: int = 10,
    ) -> MxReversalReport:
        """
        The reversal frame turns a bundle of m_x(W1, W2) into one whose curve from 0 is the
        old second curve. Its distance to 1 is compared with that of the first curve of an
        independent m_x(W2, W1) sample.
        """
        streams = self.streams(seed)
        forward = self.sample_m_x(kappa, w1, w2, x, n, seed, dt, t_max, traces=True, stride=stride, streams=streams)
        swapped = self.sample_m_x(kappa, w2, w1, x, n, seed, dt, t_max, traces=True, stride=stride, streams=streams.child(3))
        reversed_ = forward.features["reversed_distance"]
        direct = swapped.features["direct_distance"]
        forward_weights = np.where(forward.flags | ~np.isfinite(reversed_), 0.0, forward.weights)
        swapped_weights = np.where(swapped.flags | ~np.isfinite(direct), 0.0, swapped.weights)
        if forward_weights.sum() <= 0.0 or swapped_weights.sum() <= 0.0:
            self.log_util.error(service_name="SamplerService", message=f"m_x reversal at x={x}: no usable bundle on one side")
            raise SLENumericalException(f"m_x reversal check for W=({w1}, {w2}) has no bundle with positive weight")

        ess = {"forward": effective_sample_size(forward_weights), "swapped": effective_sample_size(swapped_weights)}
        size = max(2, int(min(ess.values())))
        generator = streams.child(4).block(0)
        left = weighted_resample(reversed_, forward_weights, size, generator)
        right = weighted_resample(direct, swapped_weights, size, generator)
        statistic, p_value = ks_two_sample(left, right)
        self.log_util.info(service_name="SamplerService", message=f"m_x reversal W=({w1}, {w2}) x={x}: KS={statistic:.4f} p={p_value:.3g} (resample {size})")
        return MxReversalReport(
            kappa=kappa,
            W=[w1, w2],
            x=x,
            statistic=statistic,
            p_value=p_value,
            masses={"forward": list(forward.total_mass()), "swapped": list(swapped.total_mass())},
            effective_sample_sizes=ess,
            resample_size=size,
            n=n,
            failure_rate=max(forward.failure_rate, swapped.failure_rate),
        )

    def reversal_frame(self, x: float) -> MobiusMap:
        """
        z -> x (z - 1) / (z - x): swaps 0 <-> 1 and x <-> infinity.
        """
        if not 0.0 < x < 1.0:
            raise SLEValidationException(f"x={x} must lie in (0, 1)")
        return MobiusMap(a=x, b=-x, c=1.0, d=-x)

    def bundle_summary(self, first_chain: LoewnerChain, second_chain: LoewnerChain, u: float, v: float, x: float, stride: int = 10) -> Tuple[float, float]:
        """
        Distance from the curve started at 0 to the point 1, for the bundle itself and
        for its image under the reversal frame (where the second curve becomes the one
        started at 0).
        """
        first_trace = self.loewner_service.chain_trace(first_chain, stride=stride)
        direct = self.loewner_service.trace_distance(first_trace, 1.0)

        second_trace = self.loewner_service.chain_trace(second_chain, stride=stride)
        w = second_trace.points
        frame_inverse = MobiusMap(a=v, b=u, c=1.0, d=1.0)
        z = self.loewner_service.map_points_inverse(first_chain, frame_inverse(w))
        with np.errstate(divide="ignore", invalid="ignore"):
            mapped = self.reversal_frame(x)(z)
        mapped = mapped[np.isfinite(mapped)]
        if mapped.size == 0:
            return direct, float("inf")
        reversed_trace = CurveTrace(times=np.arange(mapped.size, dtype=float), points=mapped)
        return direct, self.loewner_service.trace_distance(reversed_trace, 1.0)

    # ---- helpers -----------------------------------------------------------------

    def _check_simple_phase(self, kappa: float):
        if not 0.0 < kappa < 4.0:
            self.log_util.error(service_name="SamplerService", message=f"kappa={kappa} outside the simple phase")
            raise SLEValidationException(f"kappa={kappa} is outside the simple phase (0, 4)")
