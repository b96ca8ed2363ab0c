import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

# Utils
from utils.log_utils import LogUtil

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Services
from services.exponent_service import EXPONENT_COLUMNS, ExponentService

# Models
from models.loewner_data import MobiusMap

exponent_service = ExponentService(log_util=LogUtil(console=False))


def test_exponent_examples():
    assert exponent_service.exponents(2.0).b == pytest.approx(1.0)
    assert exponent_service.exponents(8.0 / 3.0).b2 == pytest.approx(2.0)
    assert exponent_service.exponents(1.0).Q == pytest.approx(2.5)
    assert exponent_service.exponents(4.0).b_rho(2.0) == pytest.approx(4.0)


@pytest.mark.parametrize("kappa", [0.0, -1.0, 8.0, 9.5])
def test_exponents_reject_kappa_out_of_range(kappa):
    with pytest.raises(SLEValidationException):
        exponent_service.exponents(kappa)


@given(st.floats(min_value=0.05, max_value=3.99))
def test_exponent_identities(kappa):
    table = exponent_service.exponents(kappa)
    beta = table.gamma - 2.0 / table.gamma
    assert table.b_rho(0.0) == pytest.approx(table.b2, rel=1e-12, abs=1e-12)
    assert table.b_weight(2.0) == pytest.approx(table.b, rel=1e-12, abs=1e-12)
    assert table.delta(table.gamma) == pytest.approx(1.0, rel=1e-12)
    assert table.delta(beta) + table.b == pytest.approx(1.0, rel=1e-12)
    assert table.beta_of_W(2.0) == pytest.approx(table.gamma)


def test_exponent_rows_over_default_grid():
    kappas = np.round(np.arange(0.5, 3.91, 0.1), 10)
    rows = exponent_service.exponent_rows(kappas)
    assert len(rows) == 35
    assert all(set(row) == set(EXPONENT_COLUMNS) for row in rows)
    for row in rows:
        assert row["b_rho_0"] == pytest.approx(row["b2"])
        assert row["b_weight_2"] == pytest.approx(row["b"])
        assert row["delta_gamma"] == pytest.approx(1.0)
        assert row["delta_beta_plus_b"] == pytest.approx(1.0)


def test_poisson_kernel_examples():
    assert exponent_service.poisson_kernel(0.0, 1.0) == pytest.approx(1.0)
    assert exponent_service.poisson_kernel(0.0, 1.0, MobiusMap.affine(2.0, 0.0)) == pytest.approx(1.0)
    assert exponent_service.poisson_kernel(0.0, math.inf) == pytest.approx(1.0)
    assert exponent_service.poisson_kernel(0.25, 1.0) == pytest.approx((1.0 - 0.25) ** -2)


def test_poisson_kernel_needs_distinct_points():
    with pytest.raises(SLEValidationException):
        exponent_service.poisson_kernel(1.0, 1.0)
