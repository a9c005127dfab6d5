"""Chung-type liminf diagnostics for the running supremum of |X|."""

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .kernel_path import ConfigError, n_steps_for
from .parallel import map_ranges
from .rng import ReplicateStreams

E = math.e


def lil_normalizer(t, alpha):
    """f(t) = (t / log log t)**((alpha+2)/2), defined for t > e."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= E):
        raise ConfigError("f(t) is only defined for t > e")
    out = (t / np.log(np.log(t))) ** ((alpha + 2.0) / 2.0)
    return out if out.ndim else float(out)


def geometric_checkpoints(horizon, start=16.0, ratio=2.0):
    """start, start*ratio, ... up to ``horizon``."""
    if start <= E:
        raise ConfigError("checkpoints must exceed e")
    n = int(math.floor(math.log(horizon / start) / math.log(ratio) + 1e-12)) + 1
    return start * ratio ** np.arange(max(n, 0))


@dataclass
class LilTrace:
    checkpoints: np.ndarray
    sup_values: np.ndarray
    ratios: np.ndarray
    running_min: np.ndarray


def _trace_from_sups(checkpoints, sups, alpha):
    ratios = sups / lil_normalizer(checkpoints, alpha)
    return LilTrace(checkpoints, sups, ratios, np.minimum.accumulate(ratios))


def _checkpoint_index(checkpoints, dt):
    return np.array([n_steps_for(c, dt) for c in checkpoints], dtype=np.int64)


def lil_trace(path, kernel, checkpoints):
    """X*_t, X*_t / f(t) and its running minimum at each checkpoint."""
    cps = np.asarray(checkpoints, dtype=float)
    if np.any(cps <= E):
        raise ConfigError("checkpoints must exceed e")
    if np.any(np.diff(cps) <= 0):
        raise ConfigError("checkpoints must be increasing")
    if cps[-1] > path.times[-1] + 1e-9 * path.spec.dt:
        raise ConfigError("checkpoint beyond the path horizon")
    idx = _checkpoint_index(cps, path.spec.dt)
    running = np.maximum.accumulate(np.abs(path.x_values))
    return _trace_from_sups(cps, running[idx], kernel.alpha)


def stretched_functional(path, n, mode="chung", alpha=None):
    """X_{n s} / (n / loglog n)**((alpha+2)/2) (chung) or / (n loglog n)**(...) (strassen).

    Returned on the grid of s in [0, 1] induced by the path grid: (s, values).
    """
    if n < 3:
        raise ConfigError("n must be at least 3")
    if alpha is None:
        if path.kernel is None:
            raise ConfigError("alpha is required when the path carries no kernel")
        alpha = path.kernel.alpha
    k = n_steps_for(n, path.spec.dt)
    if k >= path.times.size:
        raise ConfigError(f"path horizon {path.times[-1]} is shorter than n={n}")
    ll = math.log(math.log(n))
    if mode == "chung":
        scale = (n / ll) ** ((alpha + 2.0) / 2.0)
    elif mode == "strassen":
        scale = (n * ll) ** ((alpha + 2.0) / 2.0)
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    return path.times[: k + 1] / n, path.x_values[: k + 1] / scale


def _lil_chunk(alpha, lam, dt, idx, seed, offset, lo, hi):
    streams = ReplicateStreams(seed)
    out = np.empty((hi - lo, idx.size))
    for i in range(hi - lo):
        out[i] = _kernels.running_sup_path(streams.generator(offset + lo + i), alpha, lam, 0.0,
                                           0.0, dt, idx)
    return out


def sample_running_sup(kernel, spec, checkpoints, n, offset=0, workers=1):
    """X* at each checkpoint for ``n`` streamed paths, shape (n, len(checkpoints))."""
    cps = np.asarray(checkpoints, dtype=float)
    idx = _checkpoint_index(cps, spec.dt)
    if idx[-1] > spec.n_steps:
        raise ConfigError("checkpoint beyond the horizon")
    func = functools.partial(_lil_chunk, kernel.alpha, kernel.lam, spec.dt, idx, spec.seed,
                             int(offset))
    return map_ranges(func, int(n), workers)


def lil_ensemble(kernel, spec, checkpoints, n, offset=0, workers=1):
    cps = np.asarray(checkpoints, dtype=float)
    if np.any(cps <= E):
        raise ConfigError("checkpoints must exceed e")
    sups = sample_running_sup(kernel, spec, cps, n, offset, workers)
    return [_trace_from_sups(cps, row, kernel.alpha) for row in sups]


@dataclass
class LilComparison:
    target: float
    final_running_min: np.ndarray
    deltas: tuple
    fraction_below: dict
    quantiles: dict


def lil_constant_comparison(ensemble, rate, alpha, deltas=(0.5, 1.0)):
    """Set the ensemble's running minima against c* = k_hat**((alpha+2)/2).

    Reports, for each delta, the fraction of paths whose running minimum has
    dipped below (1 + delta) c*.
    """
    k_hat = rate.k_hat if hasattr(rate, "k_hat") else float(rate)
    target = k_hat ** ((alpha + 2.0) / 2.0)
    final = np.array([tr.running_min[-1] for tr in ensemble]) if ensemble else np.empty(0)
    frac = {}
    for d in deltas:
        frac[d] = float(np.mean(final < (1.0 + d) * target)) if final.size else math.nan
    q = {}
    if final.size:
        for p in (0.1, 0.5, 0.9):
            q[p] = float(np.quantile(final, p))
    return LilComparison(target, final, tuple(deltas), frac, q)
