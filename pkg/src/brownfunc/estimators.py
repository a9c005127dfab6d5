"""Survival curves, exponential rate fits, small-ball fits and structural checks."""

import functools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exit_sampler import (
    ORIGIN,
    ExitBatch,
    StartState,
    Status,
    Window,
    sample_exits,
    survival_fraction,
)
from .kernel_path import ConfigError, Kernel
from .parallel import map_ranges
from .rng import ReplicateStreams
from .stats import binomial_sigma, two_proportion, wilson_interval, z_for_level

log = logging.getLogger(__name__)

MIN_SURVIVORS = 50
CENSOR_THRESHOLD = 1e-3
P_START = 0.5


class FitError(ValueError):
    """Not enough usable points for a fit."""


@dataclass
class SurvivalCurve:
    t_grid: np.ndarray
    survivors: np.ndarray
    n: int
    p_hat: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    censored_beyond: int
    level: float = 0.95
    horizon: float = math.inf


@dataclass
class RateFit:
    k_hat: float
    stderr: float
    r_squared: float
    fit_window: tuple
    n_points: int
    intercept: float = 0.0


def _as_batch(records):
    if isinstance(records, ExitBatch):
        return records
    return ExitBatch.from_records(records)


def build_survival_curve(records, t_grid, level=0.95):
    """Empirical P[T > t] on ``t_grid`` with Wilson bands.

    Censored records count as survivors at every grid point, so the grid must
    not extend past the common horizon.
    """
    batch = _as_batch(records)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size and np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if t_grid.size and t_grid[-1] > batch.horizon:
        raise ValueError(f"t_grid reaches {t_grid[-1]} beyond the horizon {batch.horizon}")
    n = len(batch)
    exited = np.sort(batch.exit_time[batch.status == Status.EXITED])
    survivors = n - np.searchsorted(exited, t_grid, side="right")
    with np.errstate(invalid="ignore", divide="ignore"):
        p_hat = survivors / n if n else np.full(t_grid.size, np.nan)
    lo, hi = wilson_interval(survivors, n, level)
    return SurvivalCurve(t_grid, survivors.astype(np.int64), n, p_hat, lo, hi,
                         batch.n_censored, level, batch.horizon)


def _fit_log_survival(x, p, n):
    """Weighted LS of log p on x for a nested (cumulative) family of proportions.

    Points must be ordered by nonincreasing p.  Weights are the inverse
    delta-method variances (1-p)/(n p); the slope error uses the full
    delta-method covariance Cov(log p_i, log p_j) = (1-p_i)/(n p_i), i <= j,
    because points computed from one sample are not independent.
    """
    y = np.log(p)
    var = (1.0 - p) / (n * p)
    var = np.maximum(var, 1.0 / (n * n))
    w = 1.0 / var
    design = np.column_stack([np.ones_like(x), x])
    xtw = design.T * w
    bread = np.linalg.inv(xtw @ design)
    beta = bread @ (xtw @ y)
    idx = np.arange(x.size)
    earlier = np.minimum.outer(idx, idx)
    cov = var[earlier]
    meat = xtw @ cov @ xtw.T
    vbeta = bread @ meat @ bread
    resid = y - design @ beta
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = np.sum(w * (y - ybar) ** 2)
    r2 = 1.0 - np.sum(w * resid**2) / ss_tot if ss_tot > 0 else 1.0
    return beta[1], math.sqrt(max(vbeta[1, 1], 0.0)), beta[0], min(max(r2, 0.0), 1.0)


def admissible_mask(curve, t_min=None, t_max=None, p_start=P_START,
                    min_survivors=MIN_SURVIVORS, censor_threshold=CENSOR_THRESHOLD):
    """Grid points usable for the tail fit.

    Keeps the longest run of points past the transient (p_hat <= p_start or
    t >= t_min) whose survivor count is at least ``min_survivors`` and whose
    censored share of survivors is below ``censor_threshold``.
    """
    t = curve.t_grid
    s = curve.survivors
    with np.errstate(divide="ignore", invalid="ignore"):
        cens_share = np.where(s > 0, curve.censored_beyond / s, np.inf)
    ok = (s >= min_survivors) & (cens_share < censor_threshold) & (curve.p_hat > 0)
    ok &= curve.p_hat < 1.0
    if t_min is None:
        ok &= curve.p_hat <= p_start
    else:
        ok &= t >= t_min
    if t_max is not None:
        ok &= t <= t_max
    # contiguous: drop everything after the first failure past the start
    if ok.any():
        first = int(np.argmax(ok))
        stop = first + int(np.argmin(ok[first:])) if not ok[first:].all() else ok.size
        ok[stop:] = False
    return ok


def estimate_rate(curve, t_min=None, t_max=None, p_start=P_START, min_survivors=MIN_SURVIVORS,
                  censor_threshold=CENSOR_THRESHOLD):
    """Fit P[T > t] ~ C exp(-K t) on the admissible window; returns ``RateFit``."""
    ok = admissible_mask(curve, t_min, t_max, p_start, min_survivors, censor_threshold)
    if ok.sum() < 4:
        raise FitError(f"only {int(ok.sum())} admissible grid points (need 4)")
    t = curve.t_grid[ok]
    p = curve.p_hat[ok]
    slope, se, intercept, r2 = _fit_log_survival(t, p, curve.n)
    return RateFit(-slope, se, r2, (float(t[0]), float(t[-1])), int(ok.sum()), intercept)


# ---------------------------------------------------------------- small balls


def eps_for_abscissa(s, alpha):
    """Inverse of eps -> eps**(-2/(alpha+2))."""
    return np.asarray(s, dtype=float) ** (-(alpha + 2.0) / 2.0)


def _sup_chunk(alpha, lam, dt, n_steps, cap, seed, offset, lo, hi):
    streams = ReplicateStreams(seed)
    out = np.empty(hi - lo)
    for i in range(hi - lo):
        out[i] = _kernels.sup_abs_path(streams.generator(offset + lo + i), alpha, lam, 0.0, 0.0,
                                       dt, n_steps, cap)
    return out


def sample_sup_norm(kernel, spec, n, cap=math.inf, offset=0, workers=1):
    """max |X| over the grid of [0, horizon] from the origin, capped early at ``cap``."""
    func = functools.partial(_sup_chunk, kernel.alpha, kernel.lam, spec.dt, spec.n_steps,
                             float(cap), spec.seed, int(offset))
    return map_ranges(func, int(n), workers)


@dataclass
class SmallBallFit:
    eps: np.ndarray
    abscissa: np.ndarray
    counts: np.ndarray
    q_hat: np.ndarray
    n: int
    k_prime: float
    stderr: float
    intercept: float
    r_squared: float
    dropped: list = field(default_factory=list)


def small_ball_fit(kernel, eps_list, n, spec, offset=0, workers=1):
    """Estimate q(eps) = P[sup_[0,1] |X| < eps] and regress log q on eps**(-2/(alpha+2))."""
    eps = np.asarray(eps_list, dtype=float)
    if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ConfigError("eps_list must be positive and strictly decreasing")
    if abs(spec.horizon - 1.0) > 1e-12:
        raise ConfigError("small-ball estimates are over [0, 1]: spec.horizon must be 1")
    sups = sample_sup_norm(kernel, spec, n, cap=eps[0], offset=offset, workers=workers)
    return small_ball_from_sups(kernel, eps, sups)


def small_ball_from_sups(kernel, eps, sups):
    """The small-ball regression on an existing sample of sup-norms."""
    eps = np.asarray(eps, dtype=float)
    n = len(sups)
    counts = np.searchsorted(np.sort(sups), eps, side="left")
    q_hat = counts / n
    s = eps ** (-kernel.time_exponent)
    keep = counts > 0
    dropped = [float(e) for e in eps[~keep]]
    for e in dropped:
        warnings.warn(f"q_hat({e:g}) = 0; dropped from the fit", RuntimeWarning, stacklevel=2)
    keep &= q_hat < 1.0
    if keep.sum() < 2:
        raise FitError("fewer than two usable eps values")
    slope, se, intercept, r2 = _fit_log_survival(s[keep], q_hat[keep], n)
    return SmallBallFit(eps, s, counts, q_hat, n, -slope, se, intercept, r2, dropped)


def small_ball_identity(kernel, eps, n, spec, offset=0, workers=1, z_level=3.0):
    """q(eps) against P[T_11 > eps**(-2/(alpha+2))] from independent samples.

    ``spec.dt`` is used on both sides; the two sides use disjoint replicate ids.
    """
    s = float(eps) ** (-kernel.time_exponent)
    one = spec.with_horizon(1.0)
    sups = sample_sup_norm(kernel, one, n, cap=eps, offset=offset, workers=workers)
    k1 = int(np.count_nonzero(sups < eps))
    batch = sample_exits(kernel, Window(1.0, 1.0), ORIGIN, spec.with_horizon(s), n,
                         offset=offset + n, workers=workers)
    k2, _ = survival_fraction(batch, s)
    cmp = two_proportion(k1, n, k2, n)
    return {"eps": float(eps), "abscissa": s, "q_hat": cmp.p1, "p_exit": cmp.p2,
            "pooled_sigma": cmp.sigma, "z": cmp.z, "passed": abs(cmp.z) <= z_level}


# ------------------------------------------------------- sup over start states


def default_start_grid(kernel, window, nx=5, ny=3):
    """Rectangular grid inside (-K, K) x (-a, b), K = 2 (1 v lam**(-1/alpha)) (a+b)**(1/alpha)."""
    k = 2.0 * max(1.0, kernel.lam ** (-1.0 / kernel.alpha)) * window.width ** (1.0 / kernel.alpha)
    xs = k * np.linspace(-1.0, 1.0, nx + 2)[1:-1]
    ys = np.linspace(-window.a, window.b, ny + 2)[1:-1]
    return [StartState(float(x), float(y)) for x in xs for y in ys]


def survival_table(kernel, window, starts, times, n, spec, workers=1, offset=0):
    """Survivor counts, shape (len(starts), len(times)), one sample per start.

    Start i uses replicate ids offset + i*n .. offset + (i+1)*n - 1.
    """
    times = np.asarray(times, dtype=float)
    sp = spec.with_horizon(float(times.max()))
    table = np.empty((len(starts), times.size), dtype=np.int64)
    for i, st in enumerate(starts):
        batch = sample_exits(kernel, window, st, sp, n, offset=offset + i * n, workers=workers)
        for j, t in enumerate(times):
            table[i, j] = survival_fraction(batch, t)[0]
    return table


@dataclass
class PhiSup:
    t: float
    starts: list
    p_hat: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n: int
    sup: float
    argmax: StartState
    sigma: float


def _phi_from_counts(t, starts, counts, n, level):
    p = counts / n
    lo, hi = wilson_interval(counts, n, level)
    i = int(np.argmax(p))
    return PhiSup(t, list(starts), p, lo, hi, n, float(p[i]), starts[i], binomial_sigma(p[i], n))


def phi_sup_estimate(kernel, window, start_grid, t, n, spec, level=0.95, workers=1):
    """max over ``start_grid`` of the estimated P_(x,y)[T > t], with its location."""
    starts = list(start_grid)
    if not starts:
        raise ConfigError("start_grid must be nonempty")
    for st in starts:
        if not window.contains(st.y):
            raise ConfigError(f"start y={st.y} outside the window")
    counts = survival_table(kernel, window, starts, [t], n, spec, workers)[:, 0]
    return _phi_from_counts(t, starts, counts, n, level)


@dataclass
class SubmultReport:
    s: float
    t: float
    phi_s: PhiSup
    phi_t: PhiSup
    phi_st: PhiSup
    bound: float
    sigma: float
    passed: bool


def submultiplicativity_check(kernel, window, start_grid, s, t, n, spec, z_level=3.0,
                              level=0.95, workers=1):
    """Check phi(s+t) <= phi(s) phi(t) up to ``z_level`` propagated sigmas."""
    if not (s > 0 and t > 0):
        raise ConfigError("s and t must be positive")
    starts = list(start_grid)
    times = [s, t, s + t]
    counts = survival_table(kernel, window, starts, times, n, spec, workers)
    ps, pt, pst = (_phi_from_counts(tt, starts, counts[:, j], n, level)
                   for j, tt in enumerate(times))
    sigma = math.sqrt(pst.sigma**2 + (pt.sup * ps.sigma) ** 2 + (ps.sup * pt.sigma) ** 2)
    bound = ps.sup * pt.sup
    return SubmultReport(s, t, ps, pt, pst, bound, sigma, pst.sup <= bound + z_level * sigma)


@dataclass
class AndersonReport:
    t: float
    p_origin: float
    starts: list
    p_hat: np.ndarray
    pooled_sigma: np.ndarray
    dominated: np.ndarray
    passed: bool


def require_gaussian_symmetric(kernel, window):
    if kernel.alpha != 1.0 or kernel.lam != 1.0:
        raise ConfigError("the dominance argument needs alpha = lam = 1")
    if window.a != window.b:
        raise ConfigError("the dominance argument needs a symmetric window")


def anderson_check(kernel, window, starts, t, n, spec, z_level=3.0, workers=1):
    """P_(x,y)[T > t] <= P_(0,0)[T > t] for the Gaussian symmetric case."""
    require_gaussian_symmetric(kernel, window)
    starts = list(starts)
    counts = survival_table(kernel, window, [ORIGIN] + starts, [t], n, spec, workers)[:, 0]
    k0 = int(counts[0])
    p_hat = counts[1:] / n
    sig = np.empty(len(starts))
    dom = np.empty(len(starts), dtype=bool)
    for i, k in enumerate(counts[1:]):
        cmp = two_proportion(int(k), n, k0, n)
        sig[i] = cmp.sigma
        dom[i] = cmp.diff <= z_level * cmp.sigma
    return AndersonReport(t, k0 / n, starts, p_hat, sig, dom, bool(dom.all()))


@dataclass
class LogConcavityReport:
    t: float
    triples: list
    log_mid: np.ndarray
    log_chord: np.ndarray
    sigma: np.ndarray
    violations: list
    exploratory: bool
    passed: object  # None when exploratory


def logconcavity_probe(kernel, window, triples, t, n, spec, z_level=3.0, workers=1):
    """Midpoint test of log-concavity of (x, y) -> P_(x,y)[T > t].

    ``triples`` holds (p, q) endpoint pairs (or (p, m, q) with m the midpoint).
    Only alpha = lam = 1 gets a verdict; other kernels are exploratory.
    """
    norm = []
    for tr in triples:
        p, q = (tr[0], tr[-1])
        p, q = StartState(*p), StartState(*q)
        norm.append((p, StartState((p.x + q.x) / 2, (p.y + q.y) / 2), q))
    points = sorted({pt for tr in norm for pt in tr}, key=lambda s: (s.x, s.y))
    index = {pt: i for i, pt in enumerate(points)}
    counts = survival_table(kernel, window, points, [t], n, spec, workers)[:, 0]
    p = counts / n
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.log(p)
        var = np.where(p > 0, (1 - p) / (n * p), np.inf)
    log_mid = np.empty(len(norm))
    chord = np.empty(len(norm))
    sig = np.empty(len(norm))
    violations = []
    for j, (a, m, b) in enumerate(norm):
        ia, im, ib = index[a], index[m], index[b]
        log_mid[j] = logp[im]
        chord[j] = 0.5 * (logp[ia] + logp[ib])
        if np.isneginf(chord[j]):
            sig[j] = 0.0
            continue
        sig[j] = math.sqrt(var[im] + 0.25 * var[ia] + 0.25 * var[ib]) if p[im] > 0 else 0.0
        if log_mid[j] < chord[j] - z_level * sig[j]:
            violations.append(j)
    exploratory = not (kernel.alpha == 1.0 and kernel.lam == 1.0)
    passed = None if exploratory else not violations
    return LogConcavityReport(t, norm, log_mid, chord, sig, violations, exploratory, passed)
