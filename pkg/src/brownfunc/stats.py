"""Small statistical helpers: Wilson intervals, proportion comparisons, KS."""

from collections import namedtuple

import numpy as np
from scipy import stats

ProportionComparison = namedtuple("ProportionComparison", "p1 p2 diff sigma z")


def z_for_level(level):
    """Two-sided normal quantile for a confidence level in (0, 1)."""
    if not 0 < level < 1:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    return float(stats.norm.ppf(0.5 + level / 2.0))


def wilson_interval(k, n, level=0.95):
    """Wilson score interval for k successes out of n (vectorized)."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    z = z_for_level(level)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = k / n
        denom = 1.0 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = np.clip(center - half, 0.0, 1.0)
    hi = np.clip(center + half, 0.0, 1.0)
    # keep lo <= p <= hi exactly at the boundaries
    return np.minimum(lo, p), np.maximum(hi, p)


def binomial_sigma(p, n):
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / n)) if n > 0 else float("inf")


def two_proportion(k1, n1, k2, n2):
    """Pooled two-sample z statistic for p1 - p2."""
    p1, p2 = k1 / n1, k2 / n2
    pooled = (k1 + k2) / (n1 + n2)
    sigma = float(np.sqrt(pooled * (1 - pooled) * (1.0 / n1 + 1.0 / n2)))
    diff = p1 - p2
    if sigma == 0.0:
        z = 0.0 if diff == 0.0 else float(np.sign(diff) * np.inf)
    else:
        z = diff / sigma
    return ProportionComparison(p1, p2, diff, sigma, z)


def ks_two_sample(x, y):
    """Two-sample Kolmogorov-Smirnov test; returns (statistic, p-value)."""
    res = stats.ks_2samp(np.asarray(x), np.asarray(y))
    return float(res.statistic), float(res.pvalue)
