"""The process watched at inverse local time: tau_l, Y_l = X_{tau_l}, and the
exit inequality T >= tau_{Theta-}.

L(0, .) is approximated by the band-occupation estimator of
:func:`kernel_path.local_time_zero`; the same band is used for tau so the
two stay consistent.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .kernel_path import ConfigError, default_band, local_time_zero
from .parallel import map_ranges
from .rng import ReplicateStreams
from .stats import binomial_sigma, ks_two_sample

DEFAULT_LEVELS = (0.25, 0.5, 1.0)


@dataclass
class LevyTrace:
    """(level, tau, Y) triples; levels not reached before the horizon are omitted.

    ``y_pos``/``y_neg`` hold int V+(B) and int |V-(B)|/lam up to tau, so that
    Y = y_pos - lam * y_neg can be recomputed for another lam on the same path.
    They are None for traces built from a materialized path.
    """

    levels: np.ndarray
    tau: np.ndarray
    y: np.ndarray
    y_pos: np.ndarray = None
    y_neg: np.ndarray = None
    grid_index: np.ndarray = None

    @property
    def empty(self):
        return self.levels.size == 0

    def y_for(self, lam):
        if self.y_pos is None:
            raise ValueError("trace has no positive/negative split")
        return self.y_pos - lam * self.y_neg


def build_levy_trace(path, kernel=None, level_grid=DEFAULT_LEVELS, band=None):
    """tau_l = first grid time where the local-time estimate exceeds l; Y_l = X there."""
    levels = np.asarray(level_grid, dtype=float)
    if levels.size and np.any(np.diff(levels) <= 0):
        raise ValueError("level_grid must be increasing")
    dt = path.spec.dt
    band = default_band(dt) if band is None else band
    lt = local_time_zero(path.b_values, dt, band)
    idx = np.searchsorted(lt, levels, side="right")
    reached = idx < lt.size
    idx = idx[reached]
    return LevyTrace(levels[reached], path.times[idx], path.x_values[idx], grid_index=idx)


def full_trace(path, band=None):
    """Trace at every local-time increment (every grid visit to the band)."""
    dt = path.spec.dt
    band = default_band(dt) if band is None else band
    idx = np.flatnonzero(np.abs(path.b_values) < band)
    levels = (np.arange(idx.size) + 1) * (dt / (2.0 * band))
    return LevyTrace(levels, path.times[idx], path.x_values[idx], grid_index=idx)


@dataclass
class LevyEnsemble:
    """Traces of many i.i.d. paths on one level grid, stored as arrays.

    ``tau`` is NaN where a level was not reached before the horizon.
    """

    levels: np.ndarray
    tau: np.ndarray
    y_pos: np.ndarray
    y_neg: np.ndarray
    lam: float
    horizon: float

    @property
    def y(self):
        return self.y_pos - self.lam * self.y_neg

    def traces(self):
        for i in range(self.tau.shape[0]):
            ok = ~np.isnan(self.tau[i])
            yield LevyTrace(self.levels[ok], self.tau[i, ok], self.y[i, ok],
                            self.y_pos[i, ok], self.y_neg[i, ok])

    @classmethod
    def from_traces(cls, traces, lam):
        traces = list(traces)
        levels = np.unique(np.concatenate([tr.levels for tr in traces])) if traces else np.empty(0)
        n, m = len(traces), levels.size
        tau = np.full((n, m), np.nan)
        yp = np.full((n, m), np.nan)
        yn = np.full((n, m), np.nan)
        for i, tr in enumerate(traces):
            j = np.searchsorted(levels, tr.levels)
            tau[i, j] = tr.tau
            if tr.y_pos is not None:
                yp[i, j] = tr.y_pos
                yn[i, j] = tr.y_neg
            else:
                yp[i, j] = tr.y
                yn[i, j] = 0.0
        return cls(levels, tau, yp, yn, lam, math.inf)


def _levy_chunk(alpha, lam, dt, n_steps, band, levels, seed, offset, lo, hi):
    streams = ReplicateStreams(seed)
    n, m = hi - lo, levels.size
    tau = np.empty((n, m))
    yp = np.empty((n, m))
    yn = np.empty((n, m))
    for i in range(n):
        idx, p, q = _kernels.levy_path(streams.generator(offset + lo + i), alpha, lam, 0.0, 0.0,
                                       dt, n_steps, band, levels)
        tau[i] = np.where(idx >= 0, idx * dt, np.nan)
        yp[i] = p
        yn[i] = q
    return tau, yp, yn


def sample_levy_ensemble(kernel, spec, n, levels=DEFAULT_LEVELS, band=None, offset=0, workers=1):
    """Stream ``n`` paths from the origin and record (tau, Y) at ``levels``."""
    levels = np.asarray(levels, dtype=float)
    if np.any(np.diff(levels) <= 0):
        raise ConfigError("levels must be increasing")
    band = default_band(spec.dt) if band is None else float(band)
    func = functools.partial(_levy_chunk, kernel.alpha, kernel.lam, spec.dt, spec.n_steps, band,
                             levels, spec.seed, int(offset))
    tau, yp, yn = map_ranges(func, int(n), workers)
    return LevyEnsemble(levels, tau, yp, yn, kernel.lam, spec.horizon)


def resolved_mask(ens):
    """Entries usable for level-to-level comparisons.

    Level l counts as resolved only if tau_l <= H (l / l_max)**2.  Since
    tau_l has the law of l**2 tau_1, this truncation is itself self-similar,
    so truncated samples at different levels stay comparable after rescaling.
    """
    ok = ~np.isnan(ens.tau)
    if math.isfinite(ens.horizon) and ens.levels.size:
        cut = ens.horizon * (ens.levels / ens.levels.max()) ** 2
        ok &= ens.tau <= cut
    return ok


def _as_ensemble(traces, lam=1.0):
    if isinstance(traces, LevyEnsemble):
        return traces
    return LevyEnsemble.from_traces(traces, lam)


def log_median_slope(levels, samples):
    """Least-squares slope of log median(samples[:, j]) against log levels[j].

    NaN entries (unreached levels) count as +inf, which is correct for tau
    and keeps the median well defined while fewer than half are missing.
    """
    med = np.array([np.median(np.where(np.isnan(col), np.inf, col)) for col in samples.T])
    if not np.all(np.isfinite(med)) or np.any(med <= 0):
        return math.nan, med
    slope = np.polyfit(np.log(levels), np.log(med), 1)[0]
    return float(slope), med


def tau_scaling(traces):
    """Log-median slope of tau against the level (2 for a 1/2-stable subordinator)."""
    ens = _as_ensemble(traces)
    return log_median_slope(ens.levels, ens.tau)


@dataclass
class StabilityReport:
    sufficient: bool
    alpha: float
    expected_slope: float
    slope: float = math.nan
    medians: np.ndarray = None
    resolved: np.ndarray = None
    ks_stat: float = math.nan
    ks_pvalue: float = math.nan
    message: str = ""


def stability_checks(traces, alpha, min_paths=20):
    """Self-similarity of Y: log-median |Y_l| slope and a rescaled two-level KS test.

    Uses the self-similar truncation of :func:`resolved_mask`.
    """
    ens = _as_ensemble(traces)
    expected = alpha + 2.0
    ok = resolved_mask(ens)
    y = np.where(ok, ens.y, np.nan)
    resolved = ok.sum(axis=0)
    if ens.levels.size < 2 or np.any(resolved < min_paths):
        return StabilityReport(False, alpha, expected, resolved=resolved,
                               message="insufficient data: need two levels with resolved paths")
    med = np.array([np.median(np.abs(col[~np.isnan(col)])) for col in y.T])
    slope = float(np.polyfit(np.log(ens.levels), np.log(med), 1)[0])
    lo, hi = 0, ens.levels.size - 1
    a = y[:, lo][~np.isnan(y[:, lo])] * ens.levels[lo] ** (-expected)
    b = y[:, hi][~np.isnan(y[:, hi])] * ens.levels[hi] ** (-expected)
    stat, pval = ks_two_sample(a, b)
    return StabilityReport(True, alpha, expected, slope, med, resolved, stat, pval)


@dataclass
class PositivityEstimate:
    levels: np.ndarray
    per_level: np.ndarray
    sigma: np.ndarray
    counts: np.ndarray
    pooled: float
    pooled_sigma: float
    max_gap_z: float


def positivity_estimate(traces, lam=None):
    """Frequency of Y_l > 0 per level and pooled across levels.

    With ``lam`` given and split traces, Y is recomputed for that lam on the
    same paths (coupled comparison across kernels).
    """
    ens = _as_ensemble(traces, 1.0 if lam is None else lam)
    y = ens.y if lam is None else ens.y_pos - lam * ens.y_neg
    ok = resolved_mask(ens) & ~np.isnan(y)
    counts = ok.sum(axis=0)
    if counts.size == 0 or counts.max() == 0:
        raise ValueError("no trace reached any level")
    pos = ((y > 0) & ok).sum(axis=0)
    per = np.where(counts > 0, pos / np.maximum(counts, 1), np.nan)
    sig = np.array([binomial_sigma(p, c) if c else math.inf for p, c in zip(per, counts)])
    pooled = pos.sum() / counts.sum()
    # levels share paths, so the effective sample size is at most the smallest level count
    pooled_sig = binomial_sigma(pooled, int(counts[counts > 0].min()))
    gap = 0.0
    for i in range(per.size):
        for j in range(i + 1, per.size):
            p = (pos[i] + pos[j]) / (counts[i] + counts[j])
            s = math.sqrt(p * (1 - p) * (1 / counts[i] + 1 / counts[j]))
            if s > 0:
                gap = max(gap, abs(per[i] - per[j]) / s)
    return PositivityEstimate(ens.levels, per, sig, counts, float(pooled), pooled_sig, gap)


# ------------------------------------------------------------ key inequality

UNRESOLVED = "unresolved"
HOLDS = "holds"
FAILS = "fails"
_VERDICT = {_kernels.UNRESOLVED: UNRESOLVED, _kernels.HOLDS: HOLDS, _kernels.FAILS: FAILS}


@dataclass
class KeyInequalityVerdict:
    verdict: str
    exit_time: float
    tau_before_theta: float


def key_inequality_check(path, kernel, window, band=None):
    """Check T >= tau at the last in-window trace point before Theta on one path.

    The trace is taken at every band visit.  Theta is the first trace point
    with Y outside (-a, b).
    """
    dt = path.spec.dt
    band = default_band(dt) if band is None else band
    x = path.x_values
    outside = (x <= -window.a) | (x >= window.b)
    t_exit = math.nan
    if outside[0]:
        t_exit = 0.0
        k_exit = 0
    elif outside.any():
        k_exit = int(np.argmax(outside))
        barrier = window.b if x[k_exit] >= window.b else -window.a
        t_exit = (k_exit - 1 + (barrier - x[k_exit - 1]) / (x[k_exit] - x[k_exit - 1])) * dt
    trace = full_trace(path, band)
    if math.isnan(t_exit):
        return KeyInequalityVerdict(UNRESOLVED, t_exit, math.nan)
    before = trace.grid_index < k_exit
    last_tau = float(trace.tau[before][-1]) if before.any() else 0.0
    after = np.flatnonzero(~before)
    if after.size == 0:
        return KeyInequalityVerdict(UNRESOLVED, t_exit, last_tau)
    j = after[0]
    if window.contains(trace.y[j]):
        return KeyInequalityVerdict(FAILS, t_exit, float(trace.tau[j]))
    return KeyInequalityVerdict(HOLDS, t_exit, last_tau)


def _key_chunk(alpha, lam, lower, upper, dt, n_steps, band, seed, offset, lo, hi):
    streams = ReplicateStreams(seed)
    n = hi - lo
    verdict = np.empty(n, dtype=np.int8)
    t_exit = np.empty(n)
    tau = np.empty(n)
    for i in range(n):
        verdict[i], t_exit[i], tau[i], _ = _kernels.key_inequality_path(
            streams.generator(offset + lo + i), alpha, lam, lower, upper, 0.0, 0.0, dt, n_steps,
            band)
    return verdict, t_exit, tau


@dataclass
class KeyInequalitySummary:
    n: int
    resolved: int
    holds: int
    fails: int
    verdicts: np.ndarray = field(repr=False)
    exit_time: np.ndarray = field(repr=False)
    tau_before_theta: np.ndarray = field(repr=False)

    @property
    def hold_fraction(self):
        return self.holds / self.resolved if self.resolved else math.nan


def key_inequality_batch(kernel, window, spec, n, band=None, offset=0, workers=1):
    """Streaming key-inequality verdicts for ``n`` paths started at the origin."""
    band = default_band(spec.dt) if band is None else float(band)
    func = functools.partial(_key_chunk, kernel.alpha, kernel.lam, -window.a, window.b, spec.dt,
                             spec.n_steps, band, spec.seed, int(offset))
    v, t, tau = map_ranges(func, int(n), workers)
    holds = int(np.count_nonzero(v == _kernels.HOLDS))
    fails = int(np.count_nonzero(v == _kernels.FAILS))
    return KeyInequalitySummary(int(n), holds + fails, holds, fails, v, t, tau)


def verdict_name(code):
    return _VERDICT[int(code)]
