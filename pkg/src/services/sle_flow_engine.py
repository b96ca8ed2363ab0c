"""
SLE Flow Engine
Vectorised Euler scheme for the driving process of SLE_kappa(rho), advancing every
tracked boundary point by the exact elementary slit map of each step.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from utils.log_utils import LogUtil
from utils.rng_utils import RngStreams
from exceptions.sle_exception import SLEValidationException
from models.force_config import ForceConfig
from models.flow_batch import FLAG_HORIZON, FLAG_TICKS, FLAG_UNDERFLOW, FlowBatch, FlowOptions
from models.loewner_data import LoewnerChain

# monitor(t, W, images, logderivs) -> mask of lanes to stop
Monitor = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class FlowEngine:
    """
    Runs n lanes of dW = sqrt(kappa) dB + sum_j rho_j / (W - V_j) dt in centred
    coordinates f_j = V_j - W. Each lane takes exactly one step per tick and draws its
    normal from lane ``i`` of the tick's block vector, so a lane's path depends only on
    (seed, block, lane).

    Crossings of W over a point whose side partial sum is at most -2 (or over the target)
    are events that stop the lane. Every other crossing is clamped to a reflection
    (the image restarts at distance 2 sqrt(dt)) and recorded in ``collided``.
    """

    def __init__(self, log_util: LogUtil, threads: int = 1):
        self.log_util = log_util
        self.threads = max(1, int(threads))

    def point_layout(
        self,
        n: int,
        forces: ForceConfig,
        tracked: Optional[np.ndarray] = None,
        force_positions: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Returns (positions (n, p), weights, sides, threshold-capable) for the force
        points followed by the passive tracked points.
        """
        points = forces.points
        weights = np.array([point.weight for point in points], dtype=float)
        sides = np.array([-1.0 if point.side == "L" else 1.0 for point in points])
        partial = np.zeros(len(points))
        for side in ("L", "R"):
            running = 0.0
            for k, point in enumerate(points):
                if point.side == side:
                    running += point.weight
                    partial[k] = running
        capable = (weights != 0.0) & (partial <= -2.0)

        if force_positions is None:
            force_block = np.broadcast_to(np.array([point.position for point in points], dtype=float), (n, len(points)))
        else:
            force_block = np.broadcast_to(np.asarray(force_positions, dtype=float), (n, len(points)))

        tracked_block = np.zeros((n, 0)) if tracked is None else np.asarray(tracked, dtype=float)
        if tracked_block.ndim == 1:
            tracked_block = np.broadcast_to(tracked_block, (n, tracked_block.size))
        tracked_sides = np.sign(tracked_block[0]) if tracked_block.shape[1] else np.zeros(0)
        if np.any(tracked_block == 0.0) or np.any(np.sign(tracked_block) != tracked_sides):
            raise SLEValidationException("tracked points must lie off the start point, each on a fixed side")

        positions = np.concatenate([force_block, tracked_block], axis=1)
        weights = np.concatenate([weights, np.zeros(tracked_block.shape[1])])
        sides = np.concatenate([sides, tracked_sides])
        capable = np.concatenate([capable, np.zeros(tracked_block.shape[1], dtype=bool)])
        return positions, weights, sides, capable

    def run(
        self,
        kappa: float,
        n: int,
        streams: RngStreams,
        options: FlowOptions,
        forces: Optional[ForceConfig] = None,
        tracked: Optional[np.ndarray] = None,
        target: Optional[int] = None,
        watched: Sequence[int] = (),
        monitor: Optional[Monitor] = None,
        force_positions: Optional[np.ndarray] = None,
    ) -> FlowBatch:
        if not 0.0 < kappa < 8.0:
            raise SLEValidationException(f"kappa={kappa} must lie in (0, 8)")
        if n <= 0:
            raise SLEValidationException("need at least one path")
        forces = forces or ForceConfig()
        positions, weights, sides, capable = self.point_layout(n, forces, tracked, force_positions)
        p = positions.shape[1]
        sensitive = weights != 0.0
        for j in watched:
            sensitive[j] = True
        if target is not None:
            if not 0 <= target < p:
                raise SLEValidationException(f"target index {target} out of range")
            capable[target] = True
            sensitive[target] = True

        def work(block: Tuple[int, int, int]) -> FlowBatch:
            index, start, stop = block
            return self._run_block(
                kappa=kappa,
                positions=positions[start:stop],
                weights=weights,
                sides=sides,
                capable=capable,
                sensitive=sensitive,
                target=target,
                generator=streams.block(index),
                width=streams.block_size,
                options=options,
                monitor=monitor,
            )

        blocks = list(streams.blocks(n))
        if self.threads > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(work, blocks))
        else:
            results = [work(block) for block in blocks]
        batch = FlowBatch.concat(results)

        if batch.flagged.any():
            self.log_util.warning(service_name="FlowEngine", message=f"Flagged {int(batch.flagged.sum())}/{n} paths: {batch.flag_counts()}")
        self.log_util.debug(service_name="FlowEngine", message=f"kappa={kappa} n={n} points={p} events={int((batch.event_index >= 0).sum())}")
        return batch

    @staticmethod
    def _schedule(now: np.ndarray, options: FlowOptions) -> np.ndarray:
        if options.schedule == "uniform":
            return np.full(now.shape, options.dt)
        grown = np.minimum(options.dt * np.maximum(1.0, now), options.ramp * now)
        return np.where(now <= 0.0, options.dt * 1e-3, grown)

    def _run_block(
        self,
        kappa: float,
        positions: np.ndarray,
        weights: np.ndarray,
        sides: np.ndarray,
        capable: np.ndarray,
        sensitive: np.ndarray,
        target: Optional[int],
        generator: np.random.Generator,
        width: int,
        options: FlowOptions,
        monitor: Optional[Monitor],
    ) -> FlowBatch:
        lanes, p = positions.shape
        sqrt_kappa = np.sqrt(kappa)

        f = np.where(positions == 0.0, sides[np.newaxis, :] * options.epsilon_start, positions).astype(float)
        logd = np.zeros((lanes, p))
        W = np.zeros(lanes)
        t = np.zeros(lanes)
        collided = np.zeros((lanes, p), dtype=bool)
        event_time = np.full(lanes, np.inf)
        event_index = np.full(lanes, -1, dtype=int)
        hit = np.zeros(lanes, dtype=bool)
        threshold = np.zeros(lanes, dtype=bool)
        flags = np.zeros(lanes, dtype=int)
        stop_time = np.full(lanes, np.inf)
        active = np.ones(lanes, dtype=bool)

        checkpoints = np.array(options.checkpoints, dtype=float)
        ck_W = np.zeros((lanes, checkpoints.size))
        ck_images = np.zeros((lanes, checkpoints.size, p))
        ck_logd = np.zeros((lanes, checkpoints.size, p))
        recorded = np.zeros((lanes, checkpoints.size), dtype=bool)

        # Every lane walks through the stop times in order; the last one is the horizon
        stops = np.unique(np.concatenate([checkpoints[checkpoints < options.horizon], [options.horizon]]))
        stop_slot = np.array([int(np.flatnonzero(checkpoints == s)[0]) if np.any(checkpoints == s) else -1 for s in stops])
        pointer = np.zeros(lanes, dtype=int)

        radii = np.array(options.hit_radii, dtype=float)
        min_proxy = np.abs(f)
        first_hit = np.where(min_proxy[:, :, np.newaxis] < radii, 0.0, np.inf)

        weight_cols = np.flatnonzero(weights != 0.0)
        sensitive_cols = np.flatnonzero(sensitive)
        event_cols = np.flatnonzero(capable)
        target_slot = int(np.flatnonzero(event_cols == target)[0]) if target is not None else -1

        dt_log = []
        dw_log = []

        def settle(idx: np.ndarray, mask: np.ndarray, when: np.ndarray):
            chosen = np.argmax(mask, axis=1)
            if target_slot >= 0:
                chosen = np.where(mask[:, target_slot], target_slot, chosen)
            j = event_cols[chosen]
            event_index[idx] = j
            event_time[idx] = when
            stop_time[idx] = when
            hit[idx] = j == target
            threshold[idx] = j != target
            f[idx, j] = 0.0
            active[idx] = False

        if event_cols.size:
            near = np.abs(f[:, event_cols]) < options.delta_hit
            at_start = np.flatnonzero(near.any(axis=1))
            if at_start.size:
                settle(at_start, near[at_start], np.zeros(at_start.size))
                min_proxy = np.abs(f)
                first_hit = np.where(min_proxy[:, :, np.newaxis] < radii, 0.0, np.inf)

        tick = 0
        while active.any():
            if tick >= options.max_ticks:
                flags[active] = FLAG_TICKS
                stop_time[active] = t[active]
                active[:] = False
                break
            xi = generator.standard_normal(width)[:lanes]
            tick += 1

            idx = np.flatnonzero(active)
            now = t[idx]
            h = self._schedule(now, options)
            if sensitive_cols.size:
                h = np.minimum(h, options.substep * np.min(f[np.ix_(idx, sensitive_cols)] ** 2, axis=1))
            limit = stops[pointer[idx]]
            remaining = limit - now
            snap = h >= remaining * (1.0 - 1e-12)
            h = np.where(snap, remaining, h)

            under = h < options.min_dt
            if under.any():
                bad = idx[under]
                flags[bad] = FLAG_UNDERFLOW
                stop_time[bad] = t[bad]
                active[bad] = False
                keep = ~under
                idx, now, h, snap, limit = idx[keep], now[keep], h[keep], snap[keep], limit[keep]
                if idx.size == 0:
                    continue

            fa = f[idx]
            dw = sqrt_kappa * np.sqrt(h) * xi[idx]
            if weight_cols.size:
                dw = dw + np.sum(weights[weight_cols] / -fa[:, weight_cols], axis=1) * h

            u = fa - dw[:, np.newaxis]
            crossed = np.sign(u) != sides
            root = np.sqrt(u * u + 4.0 * h[:, np.newaxis])
            with np.errstate(divide="ignore"):
                new_logd = logd[idx] + np.log(np.abs(u) / root)
            new_f = sides * root
            clamp = crossed & ~capable
            if clamp.any():
                new_f = np.where(clamp, sides * 2.0 * np.sqrt(h)[:, np.newaxis], new_f)
                new_logd = np.where(clamp, -np.inf, new_logd)
                collided[idx] |= clamp

            new_t = np.where(snap, limit, now + h)
            W[idx] += dw
            t[idx] = new_t
            f[idx] = new_f
            logd[idx] = new_logd

            if options.record_chains:
                dt_full = np.zeros(lanes)
                dw_full = np.zeros(lanes)
                dt_full[idx] = h
                dw_full[idx] = dw
                dt_log.append(dt_full)
                dw_log.append(dw_full)

            if event_cols.size:
                emask = crossed[:, event_cols] | (np.abs(new_f[:, event_cols]) < options.delta_hit)
                with_event = emask.any(axis=1)
                if with_event.any():
                    settle(idx[with_event], emask[with_event], new_t[with_event])

            with np.errstate(over="ignore", invalid="ignore"):
                proxy = np.where(f[idx] == 0.0, 0.0, np.abs(f[idx]) * np.exp(-logd[idx]))
            min_proxy[idx] = np.minimum(min_proxy[idx], proxy)
            if radii.size:
                fresh = (proxy[:, :, np.newaxis] < radii) & np.isinf(first_hit[idx])
                first_hit[idx] = np.where(fresh, new_t[:, np.newaxis, np.newaxis], first_hit[idx])

            arrived = snap & active[idx]
            if arrived.any():
                lanes_in = idx[arrived]
                slots = stop_slot[pointer[lanes_in]]
                keep = slots >= 0
                ck_W[lanes_in[keep], slots[keep]] = W[lanes_in[keep]]
                ck_images[lanes_in[keep], slots[keep]] = f[lanes_in[keep]]
                ck_logd[lanes_in[keep], slots[keep]] = logd[lanes_in[keep]]
                recorded[lanes_in[keep], slots[keep]] = True
                pointer[lanes_in] += 1
                finished = lanes_in[pointer[lanes_in] >= stops.size]
                active[finished] = False
                stop_time[finished] = t[finished]
                if target is not None:
                    flags[finished] = FLAG_HORIZON

            if monitor is not None:
                live = idx[active[idx]]
                if live.size:
                    stop = np.asarray(monitor(t[live], W[live], f[live], logd[live]), dtype=bool)
                    stopped = live[stop]
                    active[stopped] = False
                    stop_time[stopped] = t[stopped]

        # Lanes stopped early keep their frozen state at the remaining checkpoints
        for slot in range(checkpoints.size):
            missing = ~recorded[:, slot]
            ck_W[missing, slot] = W[missing]
            ck_images[missing, slot] = f[missing]
            ck_logd[missing, slot] = logd[missing]

        chains = None
        if options.record_chains:
            dts = np.array(dt_log).reshape(len(dt_log), lanes)
            dws = np.array(dw_log).reshape(len(dw_log), lanes)
            chains = [LoewnerChain(dt=dts[dts[:, i] > 0.0, i], dw=dws[dts[:, i] > 0.0, i]) for i in range(lanes)]

        return FlowBatch(
            kappa=kappa,
            positions=np.array(positions),
            weights=weights,
            sides=sides,
            W=W,
            t=t,
            images=f,
            logderivs=logd,
            collided=collided,
            event_time=event_time,
            event_index=event_index,
            hit=hit,
            threshold=threshold,
            flags=flags,
            stop_time=stop_time,
            checkpoint_times=checkpoints,
            checkpoint_W=ck_W,
            checkpoint_images=ck_images,
            checkpoint_logderivs=ck_logd,
            min_proxy=min_proxy,
            first_hit=first_hit,
            chains=chains,
        )
