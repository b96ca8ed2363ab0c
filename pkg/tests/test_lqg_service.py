import math

import numpy as np
import pytest

# Utils
from utils.stats_utils import mean_stderr

# Exceptions
from exceptions.sle_exception import SLENumericalException, SLEValidationException

# Models
from models.field_data import BoundaryFieldSample, BoundaryGrid, InsertionSpec

GAMMA = 1.0


def flat_field(grid: BoundaryGrid, replicas: int = 1) -> BoundaryFieldSample:
    return BoundaryFieldSample(grid=grid, values=np.zeros((replicas, grid.points.size)), mean_profile=np.zeros(grid.points.size))


def test_gff_covariance_examples(lqg_service):
    assert lqg_service.gff_covariance(1.0, 2.0) == pytest.approx(2.0 * math.log(2.0))
    assert lqg_service.gff_covariance(0.0, 0.5) == pytest.approx(2.0 * math.log(2.0))
    assert lqg_service.gff_covariance(0.0, 3.0) == pytest.approx(0.0)
    assert lqg_service.gff_covariance(-3.0, 0.25) == pytest.approx(lqg_service.gff_covariance(0.25, -3.0))
    assert lqg_service.gff_covariance(4.0, math.inf) == pytest.approx(2.0 * math.log(4.0))
    assert lqg_service.gff_covariance(2.0, 2.0, epsilon=0.1) == pytest.approx(-2.0 * math.log(0.1) + 4.0 * math.log(2.0))
    with pytest.raises(SLEValidationException):
        lqg_service.gff_covariance(1.0, 1.0)
    with pytest.raises(SLEValidationException):
        lqg_service.gff_covariance(math.inf, math.inf)


def test_covariance_matrix_matches_the_kernel(lqg_service):
    grid = BoundaryGrid.uniform(-2.0, 2.0, 5)
    matrix = lqg_service.covariance_matrix(grid)
    assert np.allclose(matrix, matrix.T)
    assert matrix[3, 4] == pytest.approx(lqg_service.gff_covariance(1.0, 2.0))
    assert matrix[2, 2] == pytest.approx(-2.0 * math.log(grid.epsilon))


def test_compute_CH_examples(lqg_service):
    Q = 2.0 / GAMMA + GAMMA / 2.0
    beta = 0.7
    assert lqg_service.compute_CH(InsertionSpec.build([(beta, 0.0)]), GAMMA) == pytest.approx(1.0)
    assert lqg_service.compute_CH(InsertionSpec.build([(beta, 2.0)]), GAMMA) == pytest.approx(2.0 ** (-beta * (Q - beta / 2.0)))

    pair = InsertionSpec.build([(beta, 1.0), (beta, 2.0)])
    expected = 2.0 ** (-beta * (Q - beta / 2.0)) * math.exp(0.25 * beta * beta * 2.0 * math.log(2.0))
    assert lqg_service.compute_CH(pair, GAMMA) == pytest.approx(expected)

    at_infinity = InsertionSpec.build([(0.5, math.inf), (beta, 2.0)])
    assert lqg_service.compute_CH(at_infinity, GAMMA) == pytest.approx(2.0 ** (-beta * (Q - beta / 2.0 - 0.5)))


def test_liouville_shift_examples(lqg_service):
    grid = BoundaryGrid.uniform(-2.0, 2.0, 5)
    field = flat_field(grid)
    plain = lqg_service.liouville_shift(field, InsertionSpec(), 0.0, GAMMA)
    weighted = lqg_service.liouville_shift(field, InsertionSpec.build([(GAMMA, math.inf)]), 0.0, GAMMA)
    difference = weighted.mean_profile - plain.mean_profile
    assert difference[-1] == pytest.approx(GAMMA * math.log(2.0))
    assert np.allclose(difference[1:4], 0.0)
    assert weighted.insertions.has_infinity

    shifted = lqg_service.liouville_shift(field, InsertionSpec(), 1.5, GAMMA)
    assert np.allclose(shifted.mean_profile - plain.mean_profile, 1.5)
    assert shifted.shift == 1.5

    once = lqg_service.liouville_shift(field, InsertionSpec.build([(GAMMA, 0.0)]), 0.0, GAMMA)
    with pytest.raises(SLEValidationException):
        lqg_service.liouville_shift(once, InsertionSpec.build([(GAMMA, 0.0)]), 0.0, GAMMA)


def test_gmc_length_scales_with_the_constant_shift(lqg_service):
    grid = BoundaryGrid.uniform(-2.0, 2.0, 41)
    field = lqg_service.sample_boundary_gff(grid, replicas=4, seed=2)
    base = lqg_service.gmc_length(lqg_service.liouville_shift(field, InsertionSpec(), 0.0, GAMMA), GAMMA, -1.0, 1.0)
    moved = lqg_service.gmc_length(lqg_service.liouville_shift(field, InsertionSpec(), 0.8, GAMMA), GAMMA, -1.0, 1.0)
    assert base.shape == (4,)
    assert np.allclose(moved / base, math.exp(GAMMA * 0.8 / 2.0))
    with pytest.raises(SLEValidationException):
        lqg_service.gmc_length(field, GAMMA, -5.0, 1.0)
    with pytest.raises(SLEValidationException):
        lqg_service.gmc_length(field, 2.5, -1.0, 1.0)


def test_flat_field_length_is_the_interval_length(lqg_service):
    grid = BoundaryGrid.uniform(-2.0, 2.0, 41)
    length = lqg_service.gmc_length(flat_field(grid), GAMMA, -1.0, 1.0)
    assert length[0] == pytest.approx(grid.epsilon ** (GAMMA ** 2 / 4.0) * 2.0)


def test_length_disintegration_hits_the_target(lqg_service):
    grid = BoundaryGrid.uniform(-2.0, 2.0, 41)
    field = lqg_service.sample_boundary_gff(grid, replicas=6, seed=3)
    shifted, factors = lqg_service.length_disintegration_shift(field, 1.5, GAMMA)
    edges = grid.edges
    assert np.allclose(lqg_service.gmc_length(shifted, GAMMA, float(edges[0]), 0.0), 1.5)
    assert factors.shape == (6,)
    assert np.all(factors > 0.0)
    with pytest.raises(SLEValidationException):
        lqg_service.length_disintegration_shift(field, 0.0, GAMMA)
    with pytest.raises(SLEValidationException):
        lqg_service.length_disintegration_shift(flat_field(BoundaryGrid.uniform(1.0, 2.0, 5)), 1.0, GAMMA)


def test_samples_are_reproducible(lqg_service):
    grid = BoundaryGrid.uniform(-1.0, 1.0, 9)
    first = lqg_service.sample_boundary_gff(grid, replicas=300, seed=7)
    second = lqg_service.sample_boundary_gff(grid, replicas=300, seed=7)
    assert np.array_equal(first.values, second.values)
    assert first.values.shape == (300, 9)


def test_field_covariance_check(lqg_service):
    report = lqg_service.field_covariance_check(BoundaryGrid.uniform(-1.0, 1.0, 5), n=4000, seed=1)
    assert report.grid_size == 5
    assert report.max_deviation < 5.0


def test_girsanov_without_insertion_has_no_shift(lqg_service):
    grid = BoundaryGrid.uniform(-2.0, 3.0, 11)
    report = lqg_service.girsanov_check(grid, beta=0.0, s=1.0, n=200, seed=0)
    assert all(item.shift == 0.0 and item.expected == 0.0 for item in report.shifts)
    assert report.effective_sample_size == pytest.approx(200.0)


def test_girsanov_validation(lqg_service):
    grid = BoundaryGrid.uniform(-2.0, 3.0, 11)
    with pytest.raises(SLEValidationException):
        lqg_service.girsanov_check(grid, beta=1.0, s=0.3, n=10, seed=0)
    with pytest.raises(SLEValidationException):
        lqg_service.girsanov_check(grid, beta=1.0, s=3.0, n=10, seed=0)


@pytest.mark.slow
def test_girsanov_shift_matches_the_kernel(lqg_service):
    grid = BoundaryGrid.uniform(-2.0, 3.0, 11)
    report = lqg_service.girsanov_check(grid, beta=1.0, s=1.0, n=100_000, seed=4)
    at_two = report.shift_at(2.0)
    assert at_two.expected == pytest.approx(math.log(2.0))
    assert abs(at_two.shift - at_two.expected) <= 4.0 * at_two.stderr
    assert report.max_deviation < 4.5


def test_radial_process_of_weight_two(lqg_service):
    radial = lqg_service.quantum_disk_radial(W=2.0, gamma=GAMMA, T=1.0, seed=0, c=0.3)
    assert radial.beta == pytest.approx(GAMMA)
    assert np.allclose(radial.times, -radial.times[::-1])
    assert radial.path[radial.times.size // 2] == pytest.approx(0.3)
    times, path = radial.positive_part()
    assert np.all(path - 0.3 - radial.beta * times < (radial.Q - radial.beta) * times)
    with pytest.raises(SLEValidationException):
        lqg_service.quantum_disk_radial(W=0.4, gamma=GAMMA, T=1.0, seed=0)


def test_quantum_disk_lengths(lqg_service):
    radial = lqg_service.quantum_disk_radial(W=2.0, gamma=GAMMA, T=1.0, seed=1)
    field = lqg_service.sample_boundary_gff(BoundaryGrid.uniform(-3.0, 3.0, 61), replicas=8, seed=1)
    lengths = lqg_service.quantum_disk_lengths(radial, field)
    assert lengths.left.shape == (8,)
    assert np.all(lengths.left > 0.0) and np.all(lengths.right > 0.0)
    assert lengths.window == pytest.approx(1.0)


def test_radial_process_reports_its_acceptance_rate(lqg_service):
    radial = lqg_service.quantum_disk_radial(W=2.0, gamma=GAMMA, T=1.0, seed=0)
    assert 1e-4 <= radial.acceptance_rate <= 1.0
    assert radial.attempts >= 1
    with pytest.raises(SLEValidationException):
        lqg_service.quantum_disk_radial(W=2.0, gamma=GAMMA, T=1.0, seed=0, min_acceptance=0.0)


def test_radial_process_refuses_a_tiny_drift_gap(lqg_service):
    # gamma close to 2 with W = 2 leaves Q - beta of about 1e-3
    with pytest.raises(SLENumericalException):
        lqg_service.quantum_disk_radial(W=2.0, gamma=1.999, T=2.0, seed=0, min_acceptance=0.05)


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_radial_process_refuses_a_tiny_drift_gap_full_budget(lqg_service, seed):
    with pytest.raises(SLENumericalException):
        lqg_service.quantum_disk_radial(W=2.0, gamma=1.999, T=10.0, seed=seed, dt=1e-3)


def test_lengths_on_a_shorter_window(lqg_service):
    radial = lqg_service.quantum_disk_radial(W=2.0, gamma=GAMMA, T=1.0, seed=1)
    field = lqg_service.sample_boundary_gff(BoundaryGrid.uniform(-3.0, 3.0, 61), replicas=8, seed=1)
    full = lqg_service.quantum_disk_lengths(radial, field)
    short = lqg_service.quantum_disk_lengths(radial, field, window=0.5)
    assert short.window == 0.5
    assert np.all(short.right <= full.right) and np.all(short.left <= full.left)
    with pytest.raises(SLEValidationException):
        lqg_service.quantum_disk_lengths(radial, field, window=2.0)


def test_window_doubling_is_stable_once_the_grid_is_covered(lqg_service):
    field = lqg_service.sample_boundary_gff(BoundaryGrid.uniform(-4.0, 4.0, 81), replicas=200, seed=5)
    report = lqg_service.window_doubling_check(W=2.0, gamma=GAMMA, T=5.0, field=field, seed=5)
    # every grid point but 0 has |log|x|| <= 5
    assert report.doubled_length[0] == pytest.approx(report.length[0])
    assert report.stable


def test_window_doubling_flags_a_short_window(lqg_service):
    field = lqg_service.sample_boundary_gff(BoundaryGrid.uniform(-4.0, 4.0, 81), replicas=400, seed=6)
    report = lqg_service.window_doubling_check(W=2.0, gamma=GAMMA, T=0.25, field=field, seed=6)
    assert report.doubled_length[0] > report.length[0]
    assert report.deviation > 2.0
    assert not report.stable


def centred_length(lqg_service, grid: BoundaryGrid, n: int, seed: int):
    field = lqg_service.sample_boundary_gff(grid, replicas=n, seed=seed)
    return mean_stderr(lqg_service.gmc_length(field, GAMMA, -1.0, 1.0))


def test_centred_length_is_stable_when_epsilon_halves(lqg_service):
    coarse = BoundaryGrid.uniform(-1.0, 1.0, 41)
    fine = BoundaryGrid.uniform(-1.0, 1.0, 41, epsilon=coarse.epsilon / 2.0)
    first, first_se = centred_length(lqg_service, coarse, n=4000, seed=12)
    second, second_se = centred_length(lqg_service, fine, n=4000, seed=13)
    assert abs(first - second) <= 3.0 * math.hypot(first_se, second_se)
    # E[length] on [-1, 1] is exactly 2
    assert abs(first - 2.0) <= 4.0 * first_se
    assert abs(second - 2.0) <= 4.0 * second_se


@pytest.mark.slow
def test_centred_length_is_stable_when_epsilon_halves_full_budget(lqg_service):
    coarse = BoundaryGrid.uniform(-1.0, 1.0, 81)
    fine = BoundaryGrid.uniform(-1.0, 1.0, 81, epsilon=coarse.epsilon / 2.0)
    first, first_se = centred_length(lqg_service, coarse, n=100_000, seed=22)
    second, second_se = centred_length(lqg_service, fine, n=100_000, seed=23)
    assert abs(first - second) <= 3.0 * math.hypot(first_se, second_se)
