"""Monte Carlo estimators and goodness-of-fit tests used by the experiments."""

from typing import Sequence, Tuple

import numpy as np
from scipy import stats

from loopsoup.src.utils.exception import domain_error

MIN_EXPECTED_COUNT = 5.0


def _as_array(samples: Sequence[float]) -> np.ndarray:
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise domain_error("no samples", "DegenerateInput")
    return values


def estimate_mean(samples: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and its standard error."""
    values = _as_array(samples)
    stderr = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), stderr


def falling_factorial_values(counts: Sequence[int], k: int) -> np.ndarray:
    x = np.asarray(counts, dtype=float)
    out = np.ones_like(x)
    for i in range(k):
        out *= x - i
    return out


def estimate_falling_factorial(counts: Sequence[int], k: int) -> Tuple[float, float]:
    """Mean and standard error of X(X-1)...(X-k+1)."""
    if k < 1:
        raise domain_error("k must be at least 1", "DomainError", k=k)
    return estimate_mean(falling_factorial_values(_as_array(counts), k))


def z_score(estimate: float, exact: float, stderr: float, floor: float = 1e-12) -> float:
    """(estimate - exact) / stderr with the standard error floored so the score stays finite."""
    return float((estimate - exact) / max(stderr, floor))


def ks_uniform(values: Sequence[float]) -> float:
    """Kolmogorov-Smirnov distance between the empirical law of `values` and U[0, 1]."""
    values = _as_array(values)
    if values.min() < 0 or values.max() > 1:
        raise domain_error("values must lie in [0, 1]", "DegenerateInput",
                           low=float(values.min()), high=float(values.max()))
    return float(stats.kstest(values, "uniform").statistic)


def ks_critical_value(count: int, level: float = 1e-3) -> float:
    """Exact one-sample KS critical value at the given level."""
    return float(stats.kstwo.ppf(1 - level, count))


def merge_small_bins(observed: Sequence[float], expected: Sequence[float],
                     minimum: float = MIN_EXPECTED_COUNT) -> Tuple[np.ndarray, np.ndarray]:
    """Merge adjacent bins left to right until every expected count reaches `minimum`."""
    observed, expected = np.asarray(observed, dtype=float), np.asarray(expected, dtype=float)
    if observed.shape != expected.shape:
        raise domain_error("observed and expected differ in length", "DegenerateInput",
                           observed=observed.size, expected=expected.size)
    merged_obs, merged_exp = [], []
    acc_obs = acc_exp = 0.0
    for o, e in zip(observed, expected):
        acc_obs += o
        acc_exp += e
        if acc_exp >= minimum:
            merged_obs.append(acc_obs)
            merged_exp.append(acc_exp)
            acc_obs = acc_exp = 0.0
    if acc_exp > 0 or acc_obs > 0:
        if merged_exp:
            merged_obs[-1] += acc_obs
            merged_exp[-1] += acc_exp
        else:
            merged_obs.append(acc_obs)
            merged_exp.append(acc_exp)
    return np.array(merged_obs), np.array(merged_exp)


def chi_square(observed: Sequence[float], expected: Sequence[float], ddof: int = 0) -> Tuple[float, float]:
    """Pearson chi-square after merging sparse bins; expected counts are rescaled to the observed total."""
    observed, expected = _as_array(observed), _as_array(expected)
    if expected.sum() <= 0 or observed.sum() <= 0:
        raise domain_error("chi-square needs positive totals", "DegenerateInput")
    observed, expected = merge_small_bins(observed, expected * observed.sum() / expected.sum())
    if observed.size < 2:
        raise domain_error("chi-square needs at least two bins", "DegenerateInput", bins=int(observed.size))
    result = stats.chisquare(observed, expected, ddof=ddof)
    return float(result.statistic), float(result.pvalue)


def two_sample_chi_square(counts_a: Sequence[float], counts_b: Sequence[float]) -> Tuple[float, float]:
    """Homogeneity test of two histograms over the same bins."""
    table = np.vstack([np.asarray(counts_a, dtype=float), np.asarray(counts_b, dtype=float)])
    columns, acc = [], np.zeros(2)
    for column in table.T:
        acc = acc + column
        if acc.sum() >= 2 * MIN_EXPECTED_COUNT:
            columns.append(acc)
            acc = np.zeros(2)
    if acc.sum() > 0:
        if columns:
            columns[-1] = columns[-1] + acc
        else:
            columns.append(acc)
    merged = np.column_stack(columns) if columns else np.zeros((2, 0))
    if np.any(merged.sum(axis=1) == 0):
        raise domain_error("one of the histograms is empty", "DegenerateInput")
    if merged.shape[1] < 2:
        raise domain_error("histograms collapse to a single bin", "DegenerateInput")
    statistic, pvalue, _, _ = stats.chi2_contingency(merged, correction=False)
    return float(statistic), float(pvalue)
