import numpy as np
import pytest

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Models
from models.loewner_data import CurveTrace

# Services
from services.gibbs_service import polylines_cross


def test_polylines_cross():
    diagonal = np.array([0.0 + 0.0j, 2.0 + 2.0j])
    other = np.array([0.0 + 2.0j, 2.0 + 0.0j])
    assert polylines_cross(diagonal, other)
    assert not polylines_cross(np.array([0.0, 1.0j, 2.0j]), np.array([1.0, 1.0 + 1.0j, 1.0 + 2.0j]))
    assert polylines_cross(np.array([0.0, 1.0 + 1.0j]), np.array([1.0 + 1.0j, 2.0]))


def test_single_link_sweeps(gibbs_service, pattern_service):
    state = gibbs_service.gibbs_msle(2.0, pattern_service.parse_lp("1-2"), [0.0, 1.0], sweeps=2, seed=0, dt=1e-2, t_max=5.0)
    assert state.sweep_heights.shape == (2, 1)
    assert np.all(state.sweep_heights > 0.0)
    curve = state.curves[0]
    assert curve.points[0] == 0.0
    assert curve.points[-1] == 1.0
    assert np.all(curve.points.imag >= 0.0)


@pytest.mark.parametrize("text", ["1-4,2-3", "1-2,3-4"])
def test_two_link_sweeps_keep_curves_disjoint(gibbs_service, pattern_service, text):
    points = [0.0, 1.0, 2.0, 3.0]
    state = gibbs_service.gibbs_msle(2.0, pattern_service.parse_lp(text), points, sweeps=2, seed=4, dt=1e-2, t_max=5.0)
    assert state.sweep_heights.shape == (2, 2)
    assert not polylines_cross(state.curves[0].points, state.curves[1].points)
    for curve, (a, b) in zip(state.curves, state.pattern.links):
        assert curve.points[0] == points[a - 1]
        assert curve.points[-1] == points[b - 1]
    assert 0.0 <= state.failure_rate <= 1.0


def test_gibbs_validation(gibbs_service, pattern_service):
    with pytest.raises(SLEValidationException):
        gibbs_service.gibbs_msle(2.0, pattern_service.lp_enumerate(4)[0], list(range(8)), sweeps=1, seed=0)
    with pytest.raises(SLEValidationException):
        gibbs_service.gibbs_msle(2.0, pattern_service.parse_lp("1-2"), [0.0, 1.0], sweeps=0, seed=0)
    with pytest.raises(SLEValidationException):
        gibbs_service.gibbs_msle(5.0, pattern_service.parse_lp("1-2"), [0.0, 1.0], sweeps=1, seed=0)


def test_capacity_at_height_cuts_at_the_first_crossing(gibbs_service):
    curve = CurveTrace(times=np.arange(4.0), points=np.array([2.0 + 0.0j, 2.0 + 1.0j, 2.0 + 2.0j, 2.0 + 3.0j]))
    # a vertical slit of height h has capacity h^2 / 4
    assert gibbs_service.capacity_at_height(curve, 2.0) == pytest.approx(1.0)
    assert gibbs_service.capacity_at_height(curve, 1.5) == pytest.approx(1.0)
    assert gibbs_service.capacity_at_height(curve, 10.0) == pytest.approx(2.25)


def test_sweeps_record_capacity_at_fixed_height(gibbs_service, pattern_service):
    state = gibbs_service.gibbs_msle(2.0, pattern_service.parse_lp("1-4,2-3"), [0.0, 1.0, 2.0, 3.0], sweeps=2, seed=4, dt=1e-2, t_max=5.0)
    assert state.height == pytest.approx(0.5)
    assert state.sweep_capacities.shape == (2, 2)
    assert np.all(state.sweep_capacities > 0.0)
    outer = state.curves[0]
    assert state.sweep_capacities[-1, 0] == pytest.approx(gibbs_service.capacity_at_height(outer, 0.5))


def test_capacity_statistic_is_stationary_after_burn_in(gibbs_service, pattern_service):
    report = gibbs_service.stationarity_check(
        2.0, pattern_service.parse_lp("1-4,2-3"), [0.0, 1.0, 2.0, 3.0],
        chains=8, sweeps=4, burn_in=1, seed=30, dt=1e-2, t_max=5.0,
    )
    assert [drift.sweep for drift in report.drifts] == [3, 4]
    assert report.reference_mean > 0.0
    assert report.max_deviation < 5.0
    with pytest.raises(SLEValidationException):
        gibbs_service.stationarity_check(2.0, pattern_service.parse_lp("1-2"), [0.0, 1.0], chains=1, sweeps=3, burn_in=0, seed=0)


@pytest.mark.slow
def test_capacity_statistic_is_stationary_full_budget(gibbs_service, pattern_service):
    report = gibbs_service.stationarity_check(
        2.0, pattern_service.parse_lp("1-4,2-3"), [0.0, 1.0, 2.0, 3.0],
        chains=48, sweeps=6, burn_in=2, seed=300,
    )
    assert report.failure_rate <= 0.01
    assert report.max_deviation < 3.0
