"""Brownian paths, the kernel V and the additive functional X = int V(B) ds."""

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .parallel import map_ranges
from .rng import ReplicateStreams, replicate_generator

MAX_STEPS = 2**62


class ConfigError(ValueError):
    """Invalid simulation parameters."""


@dataclass(frozen=True)
class Kernel:
    """V(x) = x**alpha for x >= 0 and -lam * |x|**alpha for x < 0."""

    alpha: float
    lam: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "lam"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {val!r}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def m_const(self):
        """Smallest M with |u+v|**alpha <= M (|u|**alpha + |v|**alpha)."""
        return max(1.0, 2.0 ** (self.alpha - 1.0))

    @property
    def self_similarity_index(self):
        # X_{ct} has the law of c**H X_t
        return 1.0 + self.alpha / 2.0

    @property
    def time_exponent(self):
        # space scale c maps to time scale c**(2/(alpha+2))
        return 2.0 / (self.alpha + 2.0)

    def __call__(self, x):
        return kernel_eval(self, x)


def kernel_eval(kernel, x):
    """Evaluate V at a scalar or array ``x``."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x) ** kernel.alpha
    out = np.where(x >= 0, ax, -kernel.lam * ax)
    return out if out.ndim else float(out)


def n_steps_for(horizon, dt):
    """ceil(horizon/dt), tolerant of representation error (1/1e-4 is not 10000)."""
    ratio = horizon / dt
    if not ratio < MAX_STEPS:
        raise ConfigError(f"horizon/dt = {ratio:g} steps overflows")
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        n = int(nearest)
    else:
        n = math.ceil(ratio)
    if n > MAX_STEPS:
        raise ConfigError(f"step count {n} overflows")
    return max(n, 1)


@dataclass(frozen=True)
class PathSpec:
    dt: float
    horizon: float
    seed: int = 0
    replicate_id: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError(f"horizon must be positive, got {self.horizon!r}")
        if self.dt > self.horizon:
            raise ConfigError("dt must not exceed horizon")
        for name in ("seed", "replicate_id"):
            v = int(getattr(self, name))
            if not 0 <= v < 2**64:
                raise ConfigError(f"{name} must be an unsigned 64-bit integer")
        n_steps_for(self.horizon, self.dt)

    @property
    def n_steps(self):
        return n_steps_for(self.horizon, self.dt)

    def with_replicate(self, replicate_id):
        return PathSpec(self.dt, self.horizon, self.seed, replicate_id)

    def with_horizon(self, horizon):
        return PathSpec(self.dt, horizon, self.seed, self.replicate_id)


@dataclass
class SamplePath:
    times: np.ndarray
    b_values: np.ndarray
    x_values: np.ndarray
    spec: PathSpec
    kernel: Kernel = field(default=None)

    def __post_init__(self):
        if not (self.times.size == self.b_values.size == self.x_values.size):
            raise ValueError("times, b_values and x_values must have equal length")

    def __len__(self):
        return self.times.size


def simulate_brownian(spec, x0=0.0, mirror=False):
    """B on the grid t_k = k dt, k = 0..n_steps, started at ``x0``.

    ``mirror`` negates every increment (the reflected path on the same stream).
    """
    gen = replicate_generator(spec.seed, spec.replicate_id)
    return _kernels.brownian_path(gen, float(x0), math.sqrt(spec.dt), spec.n_steps,
                                  -1.0 if mirror else 1.0)


def integrate_functional(b_path, kernel, y0=0.0, dt=1.0):
    """Cumulative trapezoid rule for int V(B) ds, started at ``y0``."""
    b_path = np.ascontiguousarray(b_path, dtype=float)
    if b_path.size == 0:
        raise ValueError("b_path must be nonempty")
    return _kernels.trapezoid_path(b_path, kernel.alpha, kernel.lam, float(y0), float(dt))


def sample_path(kernel, spec, x0=0.0, y0=0.0, mirror=False):
    """Materialize a full (t, B, X) trajectory."""
    b = simulate_brownian(spec, x0, mirror=mirror)
    x = integrate_functional(b, kernel, y0, spec.dt)
    times = np.arange(b.size) * spec.dt
    return SamplePath(times, b, x, spec, kernel)


def _endpoint_chunk(alpha, lam, x0, y0, dt, n_steps, seed, offset, lo, hi):
    streams = ReplicateStreams(seed)
    b = np.empty(hi - lo)
    x = np.empty(hi - lo)
    for i in range(hi - lo):
        b[i], x[i] = _kernels.endpoint_path(streams.generator(offset + lo + i), alpha, lam, x0, y0,
                                            dt, n_steps)
    return b, x


def sample_endpoints(kernel, spec, n, x0=0.0, y0=0.0, offset=0, workers=1):
    """(B, X) at the horizon for ``n`` streamed replicates."""
    func = functools.partial(_endpoint_chunk, kernel.alpha, kernel.lam, float(x0), float(y0),
                             spec.dt, spec.n_steps, spec.seed, int(offset))
    return map_ranges(func, int(n), workers)


def default_band(dt):
    return math.sqrt(dt)


def local_time_zero(b_path, dt, band=None):
    """Occupation estimate of L(0, t_k): dt/(2 band) * #{j <= k : |b_j| < band}."""
    if band is None:
        band = default_band(dt)
    if band <= 0:
        raise ValueError("band must be positive")
    hits = np.abs(np.asarray(b_path, dtype=float)) < band
    return np.cumsum(hits) * (dt / (2.0 * band))
