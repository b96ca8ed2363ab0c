"""
Martingale Service
The change-of-weights local martingale between SLE_kappa(rho) and SLE_kappa(rho~),
its limit on completed curves, and importance reweighting of ensembles.
"""
from typing import Optional, Sequence, Tuple

import numpy as np

from utils.log_utils import LogUtil
from utils.rng_utils import RngStreams
from utils.stats_utils import check_failure_rate, effective_sample_size, ks_two_sample, mean_stderr, weighted_resample
from exceptions.sle_exception import SLEValidationException
from models.curve_sample import CurveSample, WeightedEnsemble
from models.flow_batch import FlowBatch, FlowOptions
from models.force_config import ForceConfig
from models.loewner_data import LoewnerChain
from models.martingale_series import MarginalComparison, MartingaleCheckpoint, MartingaleSeries, TerminalSummary, TerminalWeight
from services.loewner_service import LoewnerService
from services.sle_flow_engine import FlowEngine

DEFAULT_CHECKPOINTS = (0.2, 0.4, 0.6, 0.8, 1.0)
STOP_BAND = (0.05, 20.0)
CONVERGENCE_TOLERANCE = 0.01


def sw_log_weight(kappa: float, images: np.ndarray, logderivs: np.ndarray, rho: np.ndarray, rho_tilde: np.ndarray) -> np.ndarray:
    """
    log M over the last axis of images/logderivs. Factors with a zero exponent are 1.
    """
    rho = np.asarray(rho, dtype=float)
    rho_tilde = np.asarray(rho_tilde, dtype=float)
    diff = rho_tilde - rho
    derivative_exp = diff * (rho_tilde + rho + 4.0 - kappa) / (4.0 * kappa)
    image_exp = diff / kappa
    images = np.asarray(images, dtype=float)
    logderivs = np.asarray(logderivs, dtype=float)
    total = np.zeros(images.shape[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(rho.size):
            if derivative_exp[k] != 0.0:
                total = total + derivative_exp[k] * logderivs[..., k]
            if image_exp[k] != 0.0:
                total = total + image_exp[k] * np.log(np.abs(images[..., k]))
        i, j = np.triu_indices(rho.size, k=1)
        for a, b in zip(i, j):
            pair_exp = (rho_tilde[a] * rho_tilde[b] - rho[a] * rho[b]) / (2.0 * kappa)
            if pair_exp != 0.0:
                total = total + pair_exp * np.log(np.abs(images[..., a] - images[..., b]))
    return total


class MartingaleService:
    def __init__(self, log_util: LogUtil, flow_engine: FlowEngine, loewner_service: LoewnerService, block_size: int = 512):
        self.log_util = log_util
        self.flow_engine = flow_engine
        self.loewner_service = loewner_service
        self.block_size = block_size

    # ---- M_t -------------------------------------------------------------------

    def sw_weight(self, sample: CurveSample, rho: Sequence[float], rho_tilde: Sequence[float], t: Optional[float] = None) -> float:
        """
        M_t for the force points of ``sample``; t defaults to the end of the sample.
        At t = 0 the points at 0^+ and 0^- sit exactly at 0.
        """
        kappa = sample.driving.kappa
        rho, rho_tilde = self._check_weights(sample.forces, rho, rho_tilde)
        positions = np.array([point.position for point in sample.forces.points], dtype=float)
        if t is not None and t <= 0.0:
            return float(np.exp(sw_log_weight(kappa, positions, np.zeros_like(positions), rho, rho_tilde)))
        capacity = sample.chain.capacity if t is None else t
        images, logderivs = self._state_at(sample.chain, sample.forces, capacity)
        return float(np.exp(sw_log_weight(kappa, images, logderivs, rho, rho_tilde)))

    def sw_weights(self, batch: FlowBatch, rho_tilde: Sequence[float], checkpoint: Optional[int] = None) -> np.ndarray:
        """
        M per lane from a batch whose leading points are its force points, at the end of
        the run or at one of its checkpoints.
        """
        m = len(rho_tilde)
        rho = batch.weights[:m]
        if checkpoint is None:
            images, logderivs = batch.images[:, :m], batch.logderivs[:, :m]
        else:
            images = batch.checkpoint_images[:, checkpoint, :m]
            logderivs = batch.checkpoint_logderivs[:, checkpoint, :m]
        return np.exp(sw_log_weight(batch.kappa, images, logderivs, rho, np.asarray(rho_tilde, dtype=float)))

    def initial_value(self, kappa: float, forces: ForceConfig, rho_tilde: Sequence[float]) -> float:
        positions = np.array([point.position for point in forces.points], dtype=float)
        rho = np.array([point.weight for point in forces.points], dtype=float)
        return float(np.exp(sw_log_weight(kappa, positions, np.zeros_like(positions), rho, np.asarray(rho_tilde, dtype=float))))

    def martingale_check(
        self,
        kappa: float,
        forces: ForceConfig,
        rho_tilde: Sequence[float],
        n: int,
        seed: int,
        checkpoints: Sequence[float] = DEFAULT_CHECKPOINTS,
        dt: float = 1e-3,
        band: Tuple[float, float] = STOP_BAND,
    ) -> MartingaleSeries:
        """
        Means of M stopped when M / M_0 leaves the band, at each checkpoint.
        """
        rho, rho_tilde = self._check_weights(forces, [p.weight for p in forces.points], rho_tilde)
        m0 = self.initial_value(kappa, forces, rho_tilde)
        lower, upper = band
        m = len(forces.points)

        def monitor(t, W, images, logderivs):
            ratio = np.exp(sw_log_weight(kappa, images[:, :m], logderivs[:, :m], rho, rho_tilde)) / m0
            return ~((ratio > lower) & (ratio < upper))

        options = FlowOptions(dt=dt, horizon=max(checkpoints), checkpoints=tuple(checkpoints))
        batch = self.flow_engine.run(
            kappa, n, RngStreams(seed, self.block_size), options,
            forces=forces,
            watched=range(m),
            monitor=monitor,
        )
        away = np.array([p.position != 0.0 for p in forces.points], dtype=bool)
        bad = batch.flagged | batch.collided[:, :m][:, away].any(axis=1)
        rate = check_failure_rate(bad, f"martingale check rho={rho.tolist()} -> {rho_tilde.tolist()}")
        rows = []
        for slot, time in enumerate(batch.checkpoint_times):
            values = self.sw_weights(batch, rho_tilde, checkpoint=slot)[~bad]
            mean, stderr = mean_stderr(values)
            rows.append(MartingaleCheckpoint(time=float(time), mean=mean, stderr=stderr, initial_value=m0))
        stopped = float(np.mean(batch.stop_time[~bad] < options.horizon)) if (~bad).any() else 0.0
        worst = max(row.deviation for row in rows)
        self.log_util.info(service_name="MartingaleService", message=f"Martingale check kappa={kappa}: M_0={m0:.6g}, worst deviation {worst:.2f} stderr, stopped {stopped:.2%}, failure rate {rate:.3%}")
        return MartingaleSeries(initial_value=m0, checkpoints=rows, stopped_fraction=stopped, lower=lower, upper=upper, n=n)

    # ---- limit weight ------------------------------------------------------------

    def terminal_normalization(self, kappa: float, forces: ForceConfig, rho_tilde: Sequence[float]) -> float:
        """
        Z = prod x_i^{(r~_i - r_i)(2 + r_- + r_0)/(2 kappa)} prod |x_i - x_j|^{(r~_i r~_j - r_i r_j)/(2 kappa)}.
        """
        rho_minus, rho_zero, marked, rho, rho_tilde = self._terminal_layout(kappa, forces, rho_tilde)
        exponent = (rho_tilde - rho) * (2.0 + rho_minus + rho_zero) / (2.0 * kappa)
        log_z = np.sum(exponent * np.log(marked))
        i, j = np.triu_indices(marked.size, k=1)
        log_z += np.sum((rho_tilde[i] * rho_tilde[j] - rho[i] * rho[j]) / (2.0 * kappa) * np.log(np.abs(marked[i] - marked[j])))
        return float(np.exp(log_z))

    def terminal_weight(self, sample: CurveSample, rho: Sequence[float], rho_tilde: Sequence[float]) -> TerminalWeight:
        """
        M_T / Z on a curve run to its truncation capacity T, declared converged when the
        weights at T/8, T/4, T/2 and T change by less than 1% per doubling.
        """
        kappa = sample.driving.kappa
        rho, rho_tilde = self._check_weights(sample.forces, rho, rho_tilde)
        weighted = ForceConfig(points=tuple(p.model_copy(update={"weight": float(w)}) for p, w in zip(sample.forces.points, rho)))
        normalization = self.terminal_normalization(kappa, weighted, rho_tilde)
        total = sample.chain.capacity
        if total <= 0.0:
            raise SLEValidationException("terminal weight needs a curve with positive capacity")
        history = []
        for capacity in (total / 8.0, total / 4.0, total / 2.0, total):
            images, logderivs = self._state_at(sample.chain, sample.forces, capacity)
            history.append(float(np.exp(sw_log_weight(kappa, images, logderivs, rho, rho_tilde))) / normalization)
        changes = [abs(b - a) / abs(b) if b != 0.0 else float("inf") for a, b in zip(history[:-1], history[1:])]
        converged = all(change < CONVERGENCE_TOLERANCE for change in changes)
        if not converged:
            self.log_util.warning(service_name="MartingaleService", message=f"Terminal weight not converged at T={total:.3g}: {history}")
        return TerminalWeight(
            value=history[-1],
            normalization=normalization,
            converged=converged,
            history=history,
            flagged=not converged,
            flag_reason=None if converged else "not_converged",
        )

    def terminal_weights(self, samples: Sequence[CurveSample], rho: Sequence[float], rho_tilde: Sequence[float]) -> TerminalSummary:
        weights = [self.terminal_weight(sample, rho, rho_tilde) for sample in samples]
        flags = np.array([weight.flagged or sample.flagged for weight, sample in zip(weights, samples)], dtype=bool)
        rate = check_failure_rate(flags, "terminal weights")
        values = np.array([weight.value for weight in weights])
        mean, stderr = mean_stderr(values[~flags])
        return TerminalSummary(
            n=len(weights),
            mean=mean,
            stderr=stderr,
            failure_rate=rate,
            values=values.tolist(),
            flags=flags.tolist(),
        )

    # ---- reweighting -------------------------------------------------------------

    def reweight(self, ensemble: WeightedEnsemble, weights: Sequence[float]) -> WeightedEnsemble:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != ensemble.weights.shape:
            raise SLEValidationException(f"{weights.size} weights for {ensemble.n} samples")
        accepted = weights[~ensemble.flags]
        if not np.all(np.isfinite(accepted)) or np.any(accepted < 0.0):
            raise SLEValidationException("new weights must be finite and non-negative")
        updated = ensemble.model_copy(update={"weights": np.where(ensemble.flags, 0.0, ensemble.weights * weights)})
        self.log_util.debug(service_name="MartingaleService", message=f"Reweighted {ensemble.n} samples, ESS {updated.ess():.1f}")
        return updated

    def reweighted_ks(
        self,
        direct: np.ndarray,
        proposal: np.ndarray,
        weights: np.ndarray,
        seed: int,
        size: Optional[int] = None,
    ) -> Tuple[float, float]:
        """
        Two-sample KS statistic between a direct sample and a weighted resample of the proposal.
        """
        generator = RngStreams(seed).block(0)
        resampled = weighted_resample(np.asarray(proposal), weights, size or len(direct), generator)
        return ks_two_sample(direct, resampled)

    def reweighted_marginal(
        self,
        kappa: float,
        forces: ForceConfig,
        rho_tilde: Sequence[float],
        n: int,
        seed: int,
        time: float = 0.5,
        dt: float = 1e-3,
    ) -> MarginalComparison:
        rho, rho_tilde = self._check_weights(forces, [p.weight for p in forces.points], rho_tilde)
        target = ForceConfig(points=tuple(p.model_copy(update={"weight": float(w)}) for p, w in zip(forces.points, rho_tilde)))
        options = FlowOptions(dt=dt, horizon=time, checkpoints=(time,))
        streams = RngStreams(seed, self.block_size)
        m = len(forces.points)
        proposal = self.flow_engine.run(kappa, n, streams, options, forces=forces, watched=range(m))
        direct = self.flow_engine.run(kappa, n, streams.child(1), options, forces=target, watched=range(m))
        away = np.array([p.position != 0.0 for p in forces.points], dtype=bool)
        bad = proposal.flagged | proposal.collided[:, :m][:, away].any(axis=1)
        check_failure_rate(bad | direct.flagged, f"reweighted marginal rho={rho.tolist()} -> {rho_tilde.tolist()}")
        weights = np.where(bad, 0.0, self.sw_weights(proposal, rho_tilde, checkpoint=0) / self.initial_value(kappa, forces, rho_tilde))
        statistic, p_value = self.reweighted_ks(direct.checkpoint_W[~direct.flagged, 0], proposal.checkpoint_W[:, 0], weights, seed)
        ess = effective_sample_size(weights)
        self.log_util.info(service_name="MartingaleService", message=f"Reweighted W_{time:g} vs direct: KS={statistic:.4f} p={p_value:.3g} (ESS {ess:.0f}/{n})")
        return MarginalComparison(time=time, statistic=statistic, p_value=p_value, effective_sample_size=ess, n=n)

    # ---- helpers -----------------------------------------------------------------

    def _check_weights(self, forces: ForceConfig, rho: Sequence[float], rho_tilde: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        rho = np.asarray(rho, dtype=float)
        rho_tilde = np.asarray(rho_tilde, dtype=float)
        if rho.size != len(forces.points) or rho_tilde.size != len(forces.points):
            raise SLEValidationException(f"need {len(forces.points)} weights per vector")
        for k, point in enumerate(forces.points):
            if point.position == 0.0 and rho[k] != rho_tilde[k]:
                raise SLEValidationException(f"weights at 0^{'+' if point.side == 'R' else '-'} must agree")
        for vector in (rho, rho_tilde):
            config = ForceConfig(points=tuple(p.model_copy(update={"weight": float(w)}) for p, w in zip(forces.points, vector)))
            if not config.above_threshold():
                raise SLEValidationException(f"weights {vector.tolist()} violate the continuation threshold")
        return rho, rho_tilde

    def _terminal_layout(self, kappa: float, forces: ForceConfig, rho_tilde: Sequence[float]):
        rho_tilde = np.asarray(rho_tilde, dtype=float)
        points = forces.points
        left = [k for k, p in enumerate(points) if p.side == "L"]
        zero = [k for k, p in enumerate(points) if p.side == "R" and p.position == 0.0]
        marked = [k for k, p in enumerate(points) if p.side == "R" and p.position > 0.0]
        if len(zero) != 1 or not marked or any(points[k].position != 0.0 for k in left) or len(left) > 1:
            raise SLEValidationException("terminal weight needs 0^+, optionally 0^-, and marked points right of 0")
        rho = np.array([p.weight for p in points])
        if not np.isclose(rho[zero + marked].sum(), rho_tilde[zero + marked].sum()):
            raise SLEValidationException("right-side weight totals must agree")
        for vector in (rho, rho_tilde):
            if np.cumsum(vector[zero + marked]).min() < kappa / 2.0 - 2.0:
                raise SLEValidationException(f"right-side partial sums of {vector.tolist()} drop below kappa/2 - 2")
        rho_minus = rho[left[0]] if left else 0.0
        positions = np.array([points[k].position for k in marked])
        return rho_minus, rho[zero[0]], positions, rho[marked], rho_tilde[marked]

    def _state_at(self, chain: LoewnerChain, forces: ForceConfig, capacity: float, epsilon: float = 1e-6) -> Tuple[np.ndarray, np.ndarray]:
        times = np.cumsum(chain.dt)
        steps = int(np.searchsorted(times, capacity * (1.0 + 1e-12), side="right"))
        truncated = LoewnerChain(dt=chain.dt[:steps], dw=chain.dw[:steps])
        start = np.array([
            (epsilon if p.side == "R" else -epsilon) if p.position == 0.0 else p.position
            for p in forces.points
        ])
        sides = np.array([1.0 if p.side == "R" else -1.0 for p in forces.points])
        images, logderivs, swallowed = self.loewner_service.track_points(truncated, start, sides=sides)
        swallowed &= start != sides * epsilon
        if swallowed.any():
            raise SLEValidationException(f"force point(s) {np.flatnonzero(swallowed).tolist()} swallowed before capacity {capacity}")
        return images, logderivs
