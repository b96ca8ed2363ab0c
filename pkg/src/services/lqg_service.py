"""
LQG Service
Boundary Gaussian free field on a grid, Liouville fields with boundary insertions,
the regularised GMC boundary length, and the radial process of thick quantum disks.
"""
from concurrent.futures import ThreadPoolExecutor
from threading import Lock
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from scipy import linalg

from utils.log_utils import LogUtil
from utils.rng_utils import RngStreams
from utils.stats_utils import effective_sample_size, mean_stderr
from exceptions.sle_exception import SLENumericalException, SLEValidationException
from models.field_data import BoundaryFieldSample, BoundaryGrid, InsertionSpec, RadialProcess
from models.loewner_data import is_infinite
from models.lqg_report import DiskLengths, FieldCovarianceReport, GirsanovReport, MeanShift, WindowDoublingReport
from services.exponent_service import ExponentService

RADIAL_DT = 0.05
RADIAL_BATCH = 1024
MIN_ACCEPTANCE = 1e-4
MIN_ACCEPTED = 10
WINDOW_TOLERANCE = 2.0


def log_plus(x) -> np.ndarray:
    return np.log(np.maximum(np.abs(np.asarray(x, dtype=float)), 1.0))


class LqgService:
    def __init__(self, log_util: LogUtil, exponent_service: ExponentService, block_size: int = 512, threads: int = 1):
        self.log_util = log_util
        self.exponent_service = exponent_service
        self.block_size = block_size
        self.threads = max(1, int(threads))
        self._factors: Dict[Tuple[bytes, float], np.ndarray] = {}
        self._lock = Lock()

    # ---- covariance ------------------------------------------------------------

    def gff_covariance(self, x: float, y: float, epsilon: Optional[float] = None) -> float:
        """
        G_H(x, y) = -2 log|x - y| + 2 log|x|_+ + 2 log|y|_+ on the boundary, with
        G_H(z, inf) = 2 log|z|_+. With a cutoff, |x - y| is floored at epsilon.
        """
        if is_infinite(x) and is_infinite(y):
            raise SLEValidationException("G_H is undefined with both points at infinity")
        if is_infinite(x) or is_infinite(y):
            z = y if is_infinite(x) else x
            return float(2.0 * log_plus(z))
        gap = abs(x - y)
        if epsilon is not None:
            gap = max(gap, epsilon)
        if gap == 0.0:
            raise SLEValidationException("G_H on the diagonal needs a cutoff epsilon")
        return float(-2.0 * np.log(gap) + 2.0 * log_plus(x) + 2.0 * log_plus(y))

    def covariance_matrix(self, grid: BoundaryGrid) -> np.ndarray:
        """
        Covariance of the epsilon-semicircle averages: exact G_H off the diagonal and
        -2 log epsilon + 4 log|x|_+ on it.
        """
        x = grid.points
        gap = np.maximum(np.abs(x[:, np.newaxis] - x[np.newaxis, :]), grid.epsilon)
        lp = log_plus(x)
        return -2.0 * np.log(gap) + 2.0 * lp[:, np.newaxis] + 2.0 * lp[np.newaxis, :]

    def covariance_factor(self, grid: BoundaryGrid) -> np.ndarray:
        key = (grid.points.tobytes(), float(grid.epsilon))
        with self._lock:
            factor = self._factors.get(key)
            if factor is not None:
                return factor
            try:
                factor = linalg.cholesky(self.covariance_matrix(grid), lower=True)
            except linalg.LinAlgError as error:
                self.log_util.error(service_name="LqgService", message=f"Covariance factorisation failed on {grid.points.size} points: {error}")
                raise SLENumericalException(f"regularised covariance is not positive definite (epsilon={grid.epsilon} too small for this grid)")
            factor.setflags(write=False)
            self._factors[key] = factor
            return factor

    def sample_boundary_gff(self, grid: BoundaryGrid, replicas: int = 1, seed: int = 0) -> BoundaryFieldSample:
        if replicas < 1:
            raise SLEValidationException("need at least one replica")
        factor = self.covariance_factor(grid)
        streams = RngStreams(seed, self.block_size)
        values = np.empty((replicas, grid.points.size))

        def work(block: Tuple[int, int, int]):
            index, start, stop = block
            normals = streams.block(index).standard_normal((stop - start, grid.points.size))
            values[start:stop] = normals @ factor.T

        blocks = list(streams.blocks(replicas))
        if self.threads > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(work, blocks))
        else:
            for block in blocks:
                work(block)
        self.log_util.debug(service_name="LqgService", message=f"Sampled {replicas} boundary fields on {grid.points.size} points (seed {seed})")
        return BoundaryFieldSample(grid=grid, values=values, mean_profile=np.zeros(grid.points.size))

    # ---- Liouville fields --------------------------------------------------------

    def compute_CH(self, spec: InsertionSpec, gamma: float) -> float:
        """
        C_H for boundary insertions. With s_1 finite:
            prod_i |s_i|_+^{-beta_i (Q - beta_i/2)} exp(1/4 sum_{i<j} beta_i beta_j G_H(s_i, s_j)).
        With s_1 = inf the product and the pair sum run over i >= 2 and each exponent
        gains +beta_i beta_1.
        """
        Q = self._table(gamma).Q
        items = list(spec.insertions)
        extra = 0.0
        if spec.has_infinity:
            extra = items[0].beta
            items = items[1:]
        log_c = 0.0
        for item in items:
            log_c -= item.beta * (Q - item.beta / 2.0 - extra) * float(log_plus(item.s))
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                log_c += 0.25 * items[i].beta * items[j].beta * self.gff_covariance(items[i].s, items[j].s)
        return float(np.exp(log_c))

    def liouville_shift(self, field: BoundaryFieldSample, spec: InsertionSpec, c: float, gamma: float) -> BoundaryFieldSample:
        """
        Adds -2Q log|x|_+ + 1/2 sum_i beta_i G_H(s_i, x) + c to the mean profile of a GFF sample.
        """
        Q = self._table(gamma).Q
        grid = field.grid
        x = grid.points
        mean = field.mean_profile - 2.0 * Q * log_plus(x) + c
        for item in spec.insertions:
            if is_infinite(item.s):
                mean = mean + item.beta * log_plus(x)
                continue
            distance = np.abs(x - item.s)
            if np.any((distance > 0.0) & (distance < grid.epsilon)):
                self.log_util.warning(service_name="LqgService", message=f"Insertion at {item.s} lies within epsilon={grid.epsilon} of a grid point; using the regularised kernel")
            gap = np.maximum(distance, grid.epsilon)
            mean = mean + 0.5 * item.beta * (-2.0 * np.log(gap) + 2.0 * log_plus(x) + 2.0 * log_plus(item.s))
        try:
            merged = InsertionSpec(insertions=field.insertions.insertions + spec.insertions)
        except ValidationError as error:
            raise SLEValidationException(f"cannot add insertions {spec.insertions} to {field.insertions.insertions}: {error}")
        return field.with_mean(mean, insertions=merged, shift=field.shift + c)

    def gmc_length(self, field: BoundaryFieldSample, gamma: float, a: float, b: float) -> np.ndarray:
        """
        sum_k eps^{gamma^2/4} exp(gamma/2 phi(x_k)) |cell_k cap [a, b]|, one value per replica.
        """
        self._check_gamma(gamma)
        grid = field.grid
        edges = grid.edges
        if not edges[0] <= a < b <= edges[-1]:
            raise SLEValidationException(f"interval [{a}, {b}] is not covered by the grid [{edges[0]}, {edges[-1]}]")
        widths = grid.clipped_widths(a, b)
        keep = widths > 0.0
        weights = np.exp(0.5 * gamma * field.field[:, keep])
        return grid.epsilon ** (gamma ** 2 / 4.0) * weights @ widths[keep]

    def length_disintegration_shift(self, field: BoundaryFieldSample, ell: float, gamma: float) -> Tuple[BoundaryFieldSample, np.ndarray]:
        """
        Adds (2/gamma) log(ell/L) to each replica so the left arc has length ell, and returns
        the weights (2/gamma) ell^{p-1} / L^p with p = (sum beta - 2Q)/gamma.
        """
        if ell <= 0.0:
            raise SLEValidationException(f"target length {ell} must be positive")
        edges = field.grid.edges
        if edges[0] >= 0.0:
            raise SLEValidationException("the grid has no negative half-line")
        current = self.gmc_length(field, gamma, float(edges[0]), min(0.0, float(edges[-1])))
        if np.any(current <= 0.0) or not np.all(np.isfinite(current)):
            raise SLENumericalException(f"left boundary length {current.min()} is not positive and finite")
        delta = (2.0 / gamma) * np.log(ell / current)
        power = (field.insertions.beta_sum - 2.0 * self._table(gamma).Q) / gamma
        factors = (2.0 / gamma) * ell ** (power - 1.0) / current ** power
        shifted = BoundaryFieldSample(
            grid=field.grid,
            values=field.values + delta[:, np.newaxis],
            mean_profile=field.mean_profile,
            insertions=field.insertions,
            shift=field.shift,
        )
        return shifted, factors

    # ---- quantum disks -----------------------------------------------------------

    def quantum_disk_radial(self, W: float, gamma: float, T: float, seed: int, c: float = 0.0, dt: float = RADIAL_DT, min_acceptance: float = MIN_ACCEPTANCE) -> RadialProcess:
        """
        Y_t = B_2t + beta t + c for t >= 0 and B~_-2t + (2Q - beta) t + c for t < 0, with both
        B_2t - (Q - beta) t and B~_2t - (Q - beta) t kept negative on the grid of [0, T].
        Proposals run in batches until MIN_ACCEPTED are accepted or ceil(MIN_ACCEPTED / min_acceptance)
        are spent; the observed acceptance rate must reach ``min_acceptance``.
        """
        table = self._table(gamma)
        if W < gamma ** 2 / 2.0:
            raise SLEValidationException(f"W={W} is below gamma^2/2={gamma ** 2 / 2.0}; only thick disks are sampled")
        if T <= 0.0 or dt <= 0.0:
            raise SLEValidationException("window and step must be positive")
        if not 0.0 < min_acceptance <= 1.0:
            raise SLEValidationException(f"minimum acceptance rate must lie in (0, 1], got {min_acceptance}")
        beta = table.beta_of_W(W)
        gap = table.Q - beta
        steps = int(np.ceil(T / dt))
        t = np.arange(1, steps + 1) * (T / steps)
        increment = np.sqrt(2.0 * T / steps)

        generator = RngStreams(seed, self.block_size).block(0)
        limit = int(np.ceil(MIN_ACCEPTED / min_acceptance))
        proposals, accepted, attempts = 0, 0, 0
        chosen = None
        while accepted < MIN_ACCEPTED and proposals < limit:
            walks = np.cumsum(generator.standard_normal((RADIAL_BATCH, 2, steps)) * increment, axis=2)
            ok = np.all(walks - gap * t < 0.0, axis=(1, 2))
            if chosen is None and ok.any():
                lane = int(np.argmax(ok))
                chosen = walks[lane]
                attempts = proposals + lane + 1
            accepted += int(np.count_nonzero(ok))
            proposals += RADIAL_BATCH
        rate = accepted / proposals
        if chosen is None or rate < min_acceptance:
            self.log_util.error(service_name="LqgService", message=f"Radial acceptance {accepted}/{proposals} (W={W}, gamma={gamma}, T={T})")
            raise SLENumericalException(f"acceptance rate {rate:.2g} below {min_acceptance:g} for Q - beta = {gap:.4g}; use a larger drift gap or a shorter window")

        right, left = chosen
        times = np.concatenate([-t[::-1], [0.0], t])
        path = np.concatenate([left[::-1] - (2.0 * table.Q - beta) * t[::-1], [0.0], right + beta * t]) + c
        self.log_util.debug(service_name="LqgService", message=f"Radial path W={W} accepted after {attempts} proposals (rate {rate:.3g})")
        return RadialProcess(W=W, gamma=gamma, beta=beta, shift=c, times=times, path=path, attempts=attempts, acceptance_rate=rate)

    def quantum_disk_lengths(self, radial: RadialProcess, field: BoundaryFieldSample, window: Optional[float] = None) -> DiskLengths:
        """
        Left and right GMC lengths of Y_{-log|x|} plus the centred field, which stands in for
        the lateral component. Points with |log|x|| beyond the window do not contribute;
        the window defaults to the whole radial path.
        """
        gamma = radial.gamma
        grid = field.grid
        x = grid.points
        span = float(radial.times[-1])
        window = span if window is None else window
        if not 0.0 < window <= span * (1.0 + 1e-12):
            raise SLEValidationException(f"window {window} must lie in (0, {span}]")
        with np.errstate(divide="ignore"):
            t = -np.log(np.abs(x))
        inside = np.isfinite(t) & (np.abs(t) <= window)
        radial_mean = np.interp(np.where(inside, t, 0.0), radial.times, radial.path)
        density = grid.epsilon ** (gamma ** 2 / 4.0) * np.exp(0.5 * gamma * (field.values + radial_mean))
        widths = np.where(inside, grid.cell_widths, 0.0)
        left = density[:, x < 0.0] @ widths[x < 0.0]
        right = density[:, x > 0.0] @ widths[x > 0.0]
        return DiskLengths(W=radial.W, gamma=gamma, window=window, left=left, right=right)

    def window_doubling_check(
        self,
        W: float,
        gamma: float,
        T: float,
        field: BoundaryFieldSample,
        seed: int,
        c: float = 0.0,
        dt: float = RADIAL_DT,
    ) -> WindowDoublingReport:
        radial = self.quantum_disk_radial(W, gamma, 2.0 * T, seed, c=c, dt=dt)
        short = self.quantum_disk_lengths(radial, field, window=T)
        full = self.quantum_disk_lengths(radial, field)
        length = mean_stderr(short.left + short.right)
        doubled = mean_stderr(full.left + full.right)
        change = abs(doubled[0] - length[0])
        deviation = change / doubled[1] if doubled[1] > 0.0 else float("inf") if change else 0.0
        stable = deviation < WINDOW_TOLERANCE
        if not stable:
            self.log_util.warning(service_name="LqgService", message=f"Disk lengths move by {deviation:.2f} stderr when the window doubles from {T:g}")
        return WindowDoublingReport(W=W, gamma=gamma, window=T, length=length, doubled_length=doubled, deviation=deviation, stable=stable)

    # ---- checks ------------------------------------------------------------------

    def girsanov_check(self, grid: BoundaryGrid, beta: float, s: float, n: int, seed: int) -> GirsanovReport:
        """
        Reweights centred samples by exp(beta/2 h(s) - beta^2/8 Var h(s)) and compares the
        change of the mean at every grid point with beta/2 G_H^reg(s, x).
        """
        k = grid.nearest_index(s)
        if abs(grid.points[k] - s) > 1e-9 * max(1.0, abs(s)):
            raise SLEValidationException(f"insertion point {s} is not a grid point")
        if k == 0 or k == grid.points.size - 1:
            raise SLEValidationException(f"insertion point {s} sits on the edge of the grid")
        h = self.sample_boundary_gff(grid, n, seed).values
        covariance = self.covariance_matrix(grid)
        log_w = 0.5 * beta * h[:, k] - beta ** 2 / 8.0 * covariance[k, k]
        w = np.exp(log_w - log_w.max())
        normalized = w / w.sum()
        shift = (normalized - 1.0 / n) @ h
        expected = 0.5 * beta * covariance[k]

        weighted_mean = normalized @ h
        plain_mean = h.mean(axis=0)
        influence = (w / w.mean())[:, np.newaxis] * (h - weighted_mean) - (h - plain_mean)
        stderr = influence.std(axis=0, ddof=1) / np.sqrt(n)
        error = np.abs(shift - expected)
        deviation = np.where(stderr > 0.0, error / np.where(stderr > 0.0, stderr, 1.0), np.where(error > 0.0, np.inf, 0.0))
        report = GirsanovReport(
            beta=beta,
            s=float(grid.points[k]),
            epsilon=grid.epsilon,
            n=n,
            effective_sample_size=effective_sample_size(w),
            max_deviation=float(deviation.max()),
            shifts=[MeanShift(x=float(x), shift=float(a), expected=float(b), stderr=float(e)) for x, a, b, e in zip(grid.points, shift, expected, stderr)],
        )
        self.log_util.info(service_name="LqgService", message=f"Girsanov beta={beta} s={s}: max deviation {report.max_deviation:.2f} stderr (ESS {report.effective_sample_size:.0f}/{n})")
        return report

    def field_covariance_check(self, grid: BoundaryGrid, n: int, seed: int) -> FieldCovarianceReport:
        if n < 2:
            raise SLEValidationException("need at least two samples")
        h = self.sample_boundary_gff(grid, n, seed).values
        covariance = self.covariance_matrix(grid)
        empirical = h.T @ h / n
        variance = np.diag(covariance)
        # Var of a product of centred jointly Gaussian variables
        stderr = np.sqrt((np.outer(variance, variance) + covariance ** 2) / n)
        deviation = np.abs(empirical - covariance) / stderr
        i, j = np.unravel_index(int(np.argmax(deviation)), deviation.shape)
        report = FieldCovarianceReport(
            n=n,
            grid_size=grid.points.size,
            epsilon=grid.epsilon,
            max_deviation=float(deviation[i, j]),
            worst_pair=(float(grid.points[i]), float(grid.points[j])),
            mean_abs_deviation=float(deviation.mean()),
        )
        self.log_util.info(service_name="LqgService", message=f"Field covariance on {grid.points.size} points, n={n}: max deviation {report.max_deviation:.2f} stderr")
        return report

    def _check_gamma(self, gamma: float):
        if not 0.0 < gamma < 2.0:
            raise SLEValidationException(f"gamma={gamma} must lie in (0, 2)")

    def _table(self, gamma: float):
        self._check_gamma(gamma)
        return self.exponent_service.exponents(gamma ** 2)
