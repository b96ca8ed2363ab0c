import math

import numpy as np
import pytest

# Utils
from utils.rng_utils import RngStreams
from utils.stats_utils import check_failure_rate

# Exceptions
from exceptions.sle_exception import SLENumericalException, SLEValidationException

# Services
from services.sampler_service import SamplerService
from services.sle_flow_engine import FlowEngine

# Models
from models.flow_batch import FLAG_HORIZON, FlowOptions
from models.force_config import ForceConfig


def test_driving_variance_matches_kappa(sampler_service):
    kappa, n = 2.0, 10_000
    batch = sampler_service.sample_sle_batch(kappa, n, horizon=1.0, dt=1e-2, seed=1)
    assert not batch.flagged.any()
    assert np.allclose(batch.t, 1.0)
    assert abs(batch.W.mean()) < 4.0 * math.sqrt(kappa / n)
    assert abs(batch.W.var(ddof=1) - kappa) < 4.0 * kappa * math.sqrt(2.0 / n)


def test_same_seed_is_bitwise_reproducible(sampler_service):
    first = sampler_service.sample_sle_batch(3.0, 600, horizon=0.5, dt=1e-2, seed=9, tracked=[1.0])
    second = sampler_service.sample_sle_batch(3.0, 600, horizon=0.5, dt=1e-2, seed=9, tracked=[1.0])
    assert np.array_equal(first.W, second.W)
    assert np.array_equal(first.logderivs, second.logderivs)
    other = sampler_service.sample_sle_batch(3.0, 600, horizon=0.5, dt=1e-2, seed=10, tracked=[1.0])
    assert not np.array_equal(first.W, other.W)


def test_thread_count_does_not_change_results(log_util, loewner_service, exponent_service, pattern_service, sampler_service):
    threaded = SamplerService(
        log_util=log_util,
        flow_engine=FlowEngine(log_util=log_util, threads=4),
        loewner_service=loewner_service,
        exponent_service=exponent_service,
        pattern_service=pattern_service,
        block_size=256,
    )
    forces = ForceConfig.build([(1.0, "R", 1.5)])
    serial = sampler_service.sample_sle_rho_batch(2.0, forces, 1000, horizon=0.5, dt=1e-2, seed=4, tracked=[-1.0])
    parallel = threaded.sample_sle_rho_batch(2.0, forces, 1000, horizon=0.5, dt=1e-2, seed=4, tracked=[-1.0])
    assert np.array_equal(serial.W, parallel.W)
    assert np.array_equal(serial.images, parallel.images)


def test_sample_capacity_bookkeeping(sampler_service):
    sample = sampler_service.sample_sle(2.5, horizon=0.5, dt=0.01, seed=2)
    assert sample.capacity == pytest.approx(0.5, abs=1e-12)
    assert sample.driving.times[-1] == pytest.approx(0.5, abs=1e-12)
    assert sample.driving.values[-1] == pytest.approx(sample.chain.driving_value)
    assert not sample.flagged


def test_zero_weight_force_leaves_the_path_unchanged(sampler_service):
    plain = sampler_service.sample_sle(2.0, horizon=0.3, dt=0.01, seed=5)
    forced = sampler_service.sample_sle_rho(2.0, ForceConfig.build([(1.0, "R", 0.0)]), horizon=0.3, dt=0.01, seed=5)
    assert np.array_equal(plain.driving.values, forced.driving.values)
    assert forced.threshold_time is None


def test_force_below_threshold_at_start_stops_immediately(sampler_service):
    sample = sampler_service.sample_sle_rho(2.0, ForceConfig.build([(0.0, "R", -2.1)]), horizon=1.0, dt=0.01, seed=0)
    assert sample.threshold_time == 0.0
    assert sample.capacity == 0.0


def test_sle_kappa_minus_eight_hits_its_target(sampler_service):
    kappa = 2.0
    forces = ForceConfig.build([(1.0, "R", kappa - 8.0)])
    batch = sampler_service.sample_to_target_batch(kappa, forces, target=0, n=200, seed=12, tracked=[5.0])
    assert batch.hit.mean() >= 0.99
    clean = batch.hit & ~batch.collided[:, 1]
    derivative = batch.derivatives[clean, 1]
    assert np.all((derivative > 0.0) & (derivative < 1.0))


def test_target_run_that_never_arrives_is_flagged(sampler_service):
    forces = ForceConfig.build([(1.0, "R", -6.0)])
    batch = sampler_service.sample_to_target_batch(2.0, forces, target=0, n=50, seed=1, t_max=1e-4)
    assert np.all(batch.flags[~batch.hit] == FLAG_HORIZON)
    with pytest.raises(SLENumericalException):
        check_failure_rate(batch.flagged, "short run")


def test_tick_limit_flags_every_lane(flow_engine):
    batch = flow_engine.run(2.0, 10, RngStreams(seed=0, block_size=256), FlowOptions(horizon=1.0, dt=1e-3, max_ticks=5))
    assert batch.flag_counts()["ticks"] == 10
    assert batch.failure_rate == 1.0


def test_checkpoint_derivatives_never_increase(sampler_service):
    batch = sampler_service.sample_sle_batch(
        3.0, 1000, horizon=1.0, dt=1e-2, seed=8,
        checkpoints=(0.25, 0.5, 1.0),
        tracked=[-2.0, 0.5, 3.0],
    )
    logds = batch.checkpoint_logderivs
    assert logds.shape == (1000, 3, 3)
    assert np.all(logds[:, 1:, :] <= logds[:, :-1, :])
    assert np.all(logds <= 0.0)


def test_engine_rejects_bad_input(flow_engine):
    streams = RngStreams(seed=0)
    with pytest.raises(SLEValidationException):
        flow_engine.run(8.0, 10, streams, FlowOptions())
    with pytest.raises(SLEValidationException):
        flow_engine.run(2.0, 0, streams, FlowOptions())
    with pytest.raises(SLEValidationException):
        flow_engine.run(2.0, 10, streams, FlowOptions(), tracked=np.array([-1.0, 0.0]))


def test_m_alpha_two_points_is_closed_form(sampler_service, pattern_service):
    alpha = pattern_service.to_curve_link_pattern((0, 1))
    _, estimate = sampler_service.sample_m_alpha(3.0, alpha, [0.0, 2.0], n=16, seed=0)
    assert estimate.value == pytest.approx(2.0 ** (-5.0 / 3.0))
    assert estimate.stderr == 0.0
    _, shifted = sampler_service.sample_m_alpha(3.0, alpha, [5.0, 7.0], n=16, seed=0)
    assert shifted.value == pytest.approx(estimate.value)


def test_m_alpha_rejects_bad_points(sampler_service, pattern_service):
    alpha = pattern_service.to_curve_link_pattern((0, 1, 2))
    with pytest.raises(SLEValidationException):
        sampler_service.sample_m_alpha(2.0, alpha, [0.0, 1.0], n=4, seed=0)
    with pytest.raises(SLEValidationException):
        sampler_service.sample_m_alpha(2.0, alpha, [0.0, 2.0, 1.0], n=4, seed=0)
    with pytest.raises(SLEValidationException):
        sampler_service.sample_m_alpha(5.0, alpha, [0.0, 1.0, 2.0], n=4, seed=0)


def test_m_alpha_three_points_is_positive(sampler_service, pattern_service):
    alpha = pattern_service.to_curve_link_pattern((0, 1, 2))
    ensemble, estimate = sampler_service.sample_m_alpha(2.0, alpha, [0.0, 1.0, 2.5], n=256, seed=3)
    assert ensemble.n == 256
    assert estimate.value > 0.0
    assert estimate.failure_rate <= 0.01
    assert estimate.draws.shape == (256,)


def test_green_dilation_is_close_to_one(sampler_service, pattern_service):
    alpha = pattern_service.to_curve_link_pattern((0, 1, 2))
    report = sampler_service.green_dilation(2.0, alpha, [0.0, 1.0, 2.5], scale=2.0, n=256, seed=6)
    assert report.mapped_points == [0.0, 2.0, 5.0]
    assert abs(report.ratio - 1.0) <= 4.0 * report.stderr + 0.05


@pytest.mark.slow
def test_green_dilation_full_budget(sampler_service, pattern_service):
    alpha = pattern_service.to_curve_link_pattern((0, 1, 2))
    report = sampler_service.green_dilation(2.0, alpha, [0.0, 1.0, 2.5], scale=2.0, n=10_000, seed=6)
    assert abs(report.ratio - 1.0) <= 3.0 * report.stderr + 0.01


def test_m_rho_ensemble(sampler_service):
    ensemble = sampler_service.sample_m_rho(2.0, rho=0.0, x=2.0, n=64, seed=3, t_max=50.0)
    assert ensemble.n == 64
    assert ensemble.failure_rate <= 0.01
    assert np.all(ensemble.accepted_weights() > 0.0)
    assert ensemble.params["b_rho"] == pytest.approx(3.0)
    with pytest.raises(SLEValidationException):
        sampler_service.sample_m_rho(2.0, rho=-2.5, x=2.0, n=4, seed=0)


def test_m_rho_second_stage_starts_from_the_image_of_one(sampler_service):
    ensemble = sampler_service.sample_m_rho(2.0, rho=0.0, x=2.0, n=8, seed=3, dt=1e-2, t_max=50.0, record=True)
    for flagged, (first, second, _) in zip(ensemble.flags, ensemble.bundles):
        if flagged:
            continue
        offset = first.final_images[2] - first.final_images[1]
        assert second.tracked_points[0] == 0.0
        assert second.tracked_points[1] == pytest.approx(offset)
        assert offset > 0.0


def test_m_x_ensemble_with_traces(sampler_service):
    ensemble = sampler_service.sample_m_x(2.0, 2.0, 2.0, 0.5, n=16, seed=7, t_max=4.0, traces=True)
    assert ensemble.n == 16
    assert set(ensemble.features) >= {"H", "u", "v", "direct_distance", "reversed_distance"}
    keep = ~ensemble.flags
    assert np.all(ensemble.features["v"][keep] > ensemble.features["u"][keep])
    assert np.all(ensemble.features["direct_distance"][keep] >= 0.0)
    assert len(ensemble.bundles) == 16


def test_reversal_frame_swaps_marked_points(sampler_service):
    frame = sampler_service.reversal_frame(0.25)
    assert frame(0.0) == pytest.approx(1.0)
    assert frame(1.0) == pytest.approx(0.0)
    assert math.isinf(frame(0.25))
    assert frame(math.inf) == pytest.approx(0.25)
    with pytest.raises(SLEValidationException):
        sampler_service.reversal_frame(1.5)


def test_m_x_reversal_check_compares_two_weighted_samples(sampler_service):
    report = sampler_service.m_x_reversal_check(2.0, 2.0, 3.0, 0.5, n=32, seed=7, t_max=4.0)
    assert report.W == [2.0, 3.0]
    assert 0.0 <= report.statistic <= 1.0
    assert 0.0 <= report.p_value <= 1.0
    assert 2 <= report.resample_size <= 32
    assert report.masses["forward"][0] > 0.0 and report.masses["swapped"][0] > 0.0
    assert report.failure_rate <= 0.01


def test_m_x_reversal_check_uses_independent_streams(sampler_service):
    forward = sampler_service.sample_m_x(2.0, 2.0, 2.0, 0.5, n=16, seed=7, t_max=4.0)
    swapped = sampler_service.sample_m_x(2.0, 2.0, 2.0, 0.5, n=16, seed=7, t_max=4.0, streams=sampler_service.streams(7).child(3))
    assert not np.array_equal(forward.features["u"], swapped.features["u"])


@pytest.mark.slow
def test_m_x_is_reversible_full_budget(sampler_service):
    report = sampler_service.m_x_reversal_check(2.0, 2.0, 3.0, 0.5, n=4000, seed=17)
    assert report.p_value > 0.01


def m_x_mass_shift(sampler_service, n: int, dt: float, seed: int):
    coarse = sampler_service.sample_m_x(2.0, 2.0, 3.0, 0.5, n=n, seed=seed, dt=dt, t_max=4.0)
    fine = sampler_service.sample_m_x(2.0, 2.0, 3.0, 0.5, n=n, seed=seed, dt=dt / 2.0, t_max=4.0)
    (a, a_se), (b, b_se) = coarse.total_mass(), fine.total_mass()
    return abs(a - b), math.hypot(a_se, b_se)


def test_m_x_mass_is_stable_when_the_step_halves(sampler_service):
    shift, stderr = m_x_mass_shift(sampler_service, n=256, dt=4e-3, seed=31)
    assert shift <= 4.0 * stderr


@pytest.mark.slow
def test_m_x_mass_is_stable_when_the_step_halves_full_budget(sampler_service):
    shift, stderr = m_x_mass_shift(sampler_service, n=10_000, dt=1e-3, seed=31)
    assert shift <= 2.0 * stderr


def green_hit_shift(sampler_service, pattern_service, n: int, seed: int):
    alpha = pattern_service.to_curve_link_pattern((0, 1, 2))
    _, loose = sampler_service.sample_m_alpha(2.0, alpha, [0.0, 1.0, 2.5], n=n, seed=seed, delta_hit=1e-2)
    _, tight = sampler_service.sample_m_alpha(2.0, alpha, [0.0, 1.0, 2.5], n=n, seed=seed, delta_hit=1e-3)
    return abs(loose.value - tight.value), max(loose.stderr, tight.stderr)


def test_green_weight_is_stable_when_the_hit_tolerance_shrinks(sampler_service, pattern_service):
    # same seed, so only the stopping rule differs
    shift, stderr = green_hit_shift(sampler_service, pattern_service, n=128, seed=41)
    assert shift <= 2.0 * stderr


@pytest.mark.slow
def test_green_weight_is_stable_when_the_hit_tolerance_shrinks_full_budget(sampler_service, pattern_service):
    shift, stderr = green_hit_shift(sampler_service, pattern_service, n=10_000, seed=41)
    assert shift <= stderr
