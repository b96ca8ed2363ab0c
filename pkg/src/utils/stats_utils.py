"""
Monte Carlo summaries shared by the estimators.
"""
from typing import Tuple

import numpy as np
from scipy import stats

from exceptions.sle_exception import SLENumericalException


def mean_stderr(values: np.ndarray) -> Tuple[float, float]:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return float("nan"), float("inf")
    mean = float(np.mean(values))
    if n == 1:
        return mean, float("inf")
    return mean, float(np.std(values, ddof=1) / np.sqrt(n))


def effective_sample_size(weights: np.ndarray) -> float:
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    squares = np.square(weights).sum()
    if squares == 0.0:
        return 0.0
    return float(total * total / squares)


def ratio_stderr(a: float, se_a: float, b: float, se_b: float) -> float:
    # Delta method for independent estimates; CRN callers pass paired samples instead
    if a == 0.0 or b == 0.0:
        return float("inf")
    ratio = a / b
    return float(abs(ratio) * np.sqrt((se_a / a) ** 2 + (se_b / b) ** 2))


def paired_ratio(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    """
    Ratio of means of two paired samples (common random numbers) with its delta-method stderr.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size
    mean_a = a.mean()
    mean_b = b.mean()
    ratio = mean_a / mean_b
    residual = a - ratio * b
    stderr = np.std(residual, ddof=1) / (np.sqrt(n) * abs(mean_b))
    return float(ratio), float(stderr)


def loglog_slope(radii: np.ndarray, probabilities: np.ndarray, stderrs: np.ndarray) -> Tuple[float, float, float]:
    """
    Least-squares slope of log P against log r; returns (slope, slope_stderr, intercept).
    """
    radii = np.asarray(radii, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    if np.any(probabilities <= 0.0):
        return float("nan"), float("inf"), float("nan")
    fit = stats.linregress(np.log(radii), np.log(probabilities))
    # Propagated error of the log-probabilities dominates the regression residual at few radii
    log_se = np.asarray(stderrs, dtype=float) / probabilities
    x = np.log(radii) - np.log(radii).mean()
    propagated = float(np.sqrt(np.sum((x / np.sum(x * x)) ** 2 * log_se ** 2)))
    slope_se = max(float(fit.stderr), propagated) if len(radii) > 2 else propagated
    return float(fit.slope), slope_se, float(fit.intercept)


def weighted_resample(values: np.ndarray, weights: np.ndarray, size: int, generator: np.random.Generator) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    probabilities = weights / weights.sum()
    index = generator.choice(values.shape[0], size=size, replace=True, p=probabilities)
    return np.asarray(values)[index]


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    result = stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return float(result.statistic), float(result.pvalue)


ABORT_FAILURE_RATE = 0.01


def check_failure_rate(flags: np.ndarray, context: str) -> float:
    """
    Returns the flagged fraction; raises when it exceeds the abort level.
    """
    flags = np.asarray(flags, dtype=bool)
    rate = float(flags.mean()) if flags.size else 0.0
    if rate > ABORT_FAILURE_RATE:
        raise SLENumericalException(f"{context}: {rate:.2%} of samples flagged (abort level {ABORT_FAILURE_RATE:.0%})")
    return rate
