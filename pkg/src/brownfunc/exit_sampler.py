"""Bilateral and unilateral exit times of X from the Markov pair (B, X)."""

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .kernel_path import ConfigError, Kernel, PathSpec
from .parallel import map_ranges
from .rng import ReplicateStreams
from .stats import two_proportion


class Status(enum.IntEnum):
    CENSORED = _kernels.CENSORED
    EXITED = _kernels.EXITED


class Side(enum.IntEnum):
    LOWER = _kernels.LOWER
    NONE = _kernels.NO_SIDE
    UPPER = _kernels.UPPER


@dataclass(frozen=True)
class Window:
    """The open interval (-a, b)."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ConfigError(f"window depths must be positive, got a={self.a}, b={self.b}")

    @property
    def center(self):
        return (self.b - self.a) / 2.0

    @property
    def width(self):
        return self.a + self.b

    def shrink(self, eps):
        """(-a + eps, b - eps)."""
        if not 0 <= eps < min(self.a, self.b):
            raise ConfigError(f"eps={eps} pushes the origin out of the window")
        return Window(self.a - eps, self.b - eps)

    def contains(self, y):
        return -self.a < y < self.b


@dataclass(frozen=True)
class StartState:
    x: float = 0.0
    y: float = 0.0


ORIGIN = StartState(0.0, 0.0)


@dataclass(frozen=True)
class ExitRecord:
    status: Status
    exit_time: float = math.nan
    side: Side = Side.NONE
    b_at_exit: float = math.nan
    horizon: float = math.nan

    @property
    def exited(self):
        return self.status == Status.EXITED


@dataclass
class ExitBatch:
    """Columnar collection of exit records sharing one horizon."""

    status: np.ndarray
    exit_time: np.ndarray
    side: np.ndarray
    b_at_exit: np.ndarray
    horizon: float

    def __len__(self):
        return self.status.size

    @property
    def n_censored(self):
        return int(np.count_nonzero(self.status == Status.CENSORED))

    def records(self):
        for st, t, sd, be in zip(self.status, self.exit_time, self.side, self.b_at_exit):
            yield ExitRecord(Status(int(st)), float(t), Side(int(sd)), float(be), self.horizon)

    @classmethod
    def from_records(cls, records):
        records = list(records)
        horizons = {r.horizon for r in records if not math.isnan(r.horizon)}
        if len(horizons) > 1:
            raise ValueError("records must share one horizon")
        horizon = horizons.pop() if horizons else math.inf
        return cls(
            np.array([int(r.status) for r in records], dtype=np.int8),
            np.array([r.exit_time for r in records], dtype=float),
            np.array([int(r.side) for r in records], dtype=np.int8),
            np.array([r.b_at_exit for r in records], dtype=float),
            horizon,
        )

    @classmethod
    def exponential(cls, rate, n, horizon, seed=0):
        """Synthetic records with Exponential(rate) exit times, censored at horizon."""
        t = np.random.default_rng(seed).exponential(1.0 / rate, size=n)
        cens = t > horizon
        return cls(
            np.where(cens, Status.CENSORED, Status.EXITED).astype(np.int8),
            np.where(cens, np.nan, t),
            np.where(cens, Side.NONE, Side.UPPER).astype(np.int8),
            np.full(n, np.nan),
            float(horizon),
        )


def _run_exit(kernel, lower, upper, start, spec, mirror=False):
    gen = ReplicateStreams(spec.seed).generator(spec.replicate_id)
    return _kernels.exit_path(gen, kernel.alpha, kernel.lam, lower, upper, float(start.x),
                              float(start.y), spec.dt, spec.n_steps, spec.horizon,
                              -1.0 if mirror else 1.0)


def _to_record(raw, horizon):
    status, t, side, b_exit = raw
    return ExitRecord(Status(status), t, Side(side), b_exit, horizon)


def sample_exit(kernel, window, start, spec, mirror=False):
    """Exit of X from (-a, b) for the replicate stream named by ``spec``."""
    return _to_record(_run_exit(kernel, -window.a, window.b, start, spec, mirror), spec.horizon)


def sample_unilateral_exit(kernel, barrier, start, spec, side="lower", mirror=False):
    """One-barrier exit: X <= -barrier (``side="lower"``) or X >= barrier."""
    if not barrier > 0:
        raise ConfigError("barrier must be positive")
    if side == "lower":
        lower, upper = -barrier, math.inf
    elif side == "upper":
        lower, upper = -math.inf, barrier
    else:
        raise ConfigError(f"side must be 'lower' or 'upper', got {side!r}")
    return _to_record(_run_exit(kernel, lower, upper, start, spec, mirror), spec.horizon)


def _exit_chunk(alpha, lam, lower, upper, x0, y0, dt, n_steps, horizon, seed, offset, mirror,
                lo, hi):
    streams = ReplicateStreams(seed)
    n = hi - lo
    status = np.empty(n, dtype=np.int8)
    times = np.empty(n)
    side = np.empty(n, dtype=np.int8)
    b_exit = np.empty(n)
    sign = -1.0 if mirror else 1.0
    for i in range(n):
        gen = streams.generator(offset + lo + i)
        status[i], times[i], side[i], b_exit[i] = _kernels.exit_path(
            gen, alpha, lam, lower, upper, x0, y0, dt, n_steps, horizon, sign)
    return status, times, side, b_exit


def sample_exits(kernel, window, start, spec, n, offset=0, workers=1, mirror=False,
                 lower=None, upper=None):
    """``n`` independent exits using replicate ids ``offset .. offset+n-1``.

    ``lower``/``upper`` override the window barriers (use ``math.inf`` for a
    one-sided problem).
    """
    lower = -window.a if lower is None else lower
    upper = window.b if upper is None else upper
    func = functools.partial(_exit_chunk, kernel.alpha, kernel.lam, float(lower), float(upper),
                             float(start.x), float(start.y), spec.dt, spec.n_steps,
                             spec.horizon, spec.seed, int(offset), bool(mirror))
    status, times, side, b_exit = map_ranges(func, int(n), workers)
    return ExitBatch(status, times, side, b_exit, spec.horizon)


def survival_fraction(batch, t):
    """Number of records with exit_time > t (censored records count as survivors)."""
    if t > batch.horizon:
        raise ValueError(f"t={t} beyond horizon {batch.horizon}")
    alive = (batch.status == Status.CENSORED) | (batch.exit_time > t)
    return int(np.count_nonzero(alive)), len(batch)


def scaling_map(x, y, t, eps, window, alpha):
    """Map a start/time for the eps-shrunk window to the full window.

    P_(x,y)[T_eps > t+1] = P_(x_eps, y_eps)[T_ab > t_eps].
    """
    r = 1.0 - 2.0 * eps / window.width
    if not (eps >= 0 and r > 0):
        raise ConfigError(f"eps={eps} must lie in [0, (a+b)/2)")
    c = window.center
    x_eps = x / r ** (1.0 / (alpha + 2.0))
    y_eps = (y - c) / r + c
    t_eps = (t + 1.0) / r ** (2.0 / (alpha + 2.0))
    return x_eps, y_eps, t_eps


@dataclass
class IdentityReport:
    p_left: float
    p_right: float
    n: int
    z: float
    pooled_sigma: float
    z_level: float
    passed: bool
    details: dict


def scaling_identity_check(kernel, window, start, eps, t, n, spec, z_level=3.0, workers=1):
    """Monte Carlo comparison of both sides of the scaling/translation identity.

    Left: survival past t+1 in the shrunk window from ``start``.  Right:
    survival past t_eps in the full window from the mapped start.  The two
    sides use disjoint replicate ranges.
    """
    if t + 1.0 > spec.horizon:
        raise ConfigError("need t + 1 <= horizon")
    x_e, y_e, t_e = scaling_map(start.x, start.y, t, eps, window, kernel.alpha)
    small = window.shrink(eps)
    left = sample_exits(kernel, small, start, spec.with_horizon(t + 1.0), n, offset=0,
                        workers=workers)
    right = sample_exits(kernel, window, StartState(x_e, y_e), spec.with_horizon(t_e), n,
                         offset=n, workers=workers)
    k1, _ = survival_fraction(left, t + 1.0)
    k2, _ = survival_fraction(right, t_e)
    cmp = two_proportion(k1, n, k2, n)
    return IdentityReport(k1 / n, k2 / n, n, cmp.z, cmp.sigma, z_level,
                          abs(cmp.z) <= z_level,
                          {"x_eps": x_e, "y_eps": y_e, "t_eps": t_e, "eps": eps, "t": t})
