"""Compiled per-path loops.

All loops share the same discrete model so that streaming results agree
bit-for-bit with the materialized arrays built in :mod:`kernel_path`:

    b[k] = b[k-1] + sign * sqrt(dt) * z[k]
    x[k] = x[k-1] + (0.5 * dt) * (V(b[k-1]) + V(b[k]))

with ``z[k]`` the k-th ``standard_normal`` draw of the replicate stream.
"""

import math

import numpy as np
from numba import njit

EXITED = 1
CENSORED = 0
LOWER = -1
UPPER = 1
NO_SIDE = 0

# key-inequality verdicts
UNRESOLVED = 0
HOLDS = 1
FAILS = 2


@njit(inline="always", cache=True)
def kernel_value(b, alpha, lam):
    if b >= 0.0:
        if alpha == 1.0:
            return b
        if alpha == 2.0:
            return b * b
        return b ** alpha
    if alpha == 1.0:
        return lam * b
    if alpha == 2.0:
        return -lam * (b * b)
    return -lam * (-b) ** alpha


@njit(inline="always", cache=True)
def _pos_part(b, alpha):
    if b <= 0.0:
        return 0.0
    if alpha == 1.0:
        return b
    if alpha == 2.0:
        return b * b
    return b ** alpha


@njit(cache=True)
def brownian_path(gen, x0, sqrt_dt, n_steps, sign):
    b = np.empty(n_steps + 1)
    b[0] = x0
    s = sign * sqrt_dt
    for k in range(1, n_steps + 1):
        b[k] = b[k - 1] + s * gen.standard_normal()
    return b


@njit(cache=True)
def trapezoid_path(b, alpha, lam, y0, dt):
    h = 0.5 * dt
    x = np.empty(b.size)
    x[0] = y0
    v_prev = kernel_value(b[0], alpha, lam)
    for k in range(1, b.size):
        v = kernel_value(b[k], alpha, lam)
        x[k] = x[k - 1] + h * (v_prev + v)
        v_prev = v
    return x


@njit(cache=True)
def exit_path(gen, alpha, lam, lower, upper, x0, y0, dt, n_steps, horizon, sign):
    """First exit of X from (lower, upper).

    Returns (status, exit_time, side, b_at_exit).  Crossing time and B at
    the crossing are linearly interpolated inside the step.
    """
    if y0 >= upper:
        return EXITED, 0.0, UPPER, x0
    if y0 <= lower:
        return EXITED, 0.0, LOWER, x0
    s = sign * math.sqrt(dt)
    h = 0.5 * dt
    b = x0
    x = y0
    v = kernel_value(b, alpha, lam)
    for k in range(1, n_steps + 1):
        bn = b + s * gen.standard_normal()
        vn = kernel_value(bn, alpha, lam)
        xn = x + h * (v + vn)
        if xn >= upper or xn <= lower:
            barrier = upper if xn >= upper else lower
            theta = (barrier - x) / (xn - x)
            t = (k - 1 + theta) * dt
            if t > horizon:
                return CENSORED, np.nan, NO_SIDE, np.nan
            side = UPPER if xn >= upper else LOWER
            return EXITED, t, side, b + theta * (bn - b)
        b = bn
        x = xn
        v = vn
    return CENSORED, np.nan, NO_SIDE, np.nan


@njit(cache=True)
def sup_abs_path(gen, alpha, lam, x0, y0, dt, n_steps, cap):
    """max_k |X_k| over the grid, stopping early once it reaches ``cap``."""
    s = math.sqrt(dt)
    h = 0.5 * dt
    b = x0
    x = y0
    m = abs(x)
    if m >= cap:
        return m
    v = kernel_value(b, alpha, lam)
    for _ in range(n_steps):
        bn = b + s * gen.standard_normal()
        vn = kernel_value(bn, alpha, lam)
        x = x + h * (v + vn)
        ax = abs(x)
        if ax > m:
            m = ax
            if m >= cap:
                return m
        b = bn
        v = vn
    return m


@njit(cache=True)
def levy_path(gen, alpha, lam, x0, y0, dt, n_steps, band, levels):
    """Inverse local time and X split into its positive and negative parts.

    For each level returns the first grid index at which the band counter
    estimate of L(0, .) exceeds it (-1 if not reached) and the values of
    X+ = int V+(B) and X- = int V-(B) there, so X = X+ - lam * X-.
    Stops as soon as the last level is reached.
    """
    nl = levels.size
    idx = np.full(nl, -1, dtype=np.int64)
    ypos = np.full(nl, np.nan)
    yneg = np.full(nl, np.nan)
    s = math.sqrt(dt)
    h = 0.5 * dt
    unit = dt / (2.0 * band)
    b = x0
    xp = max(y0, 0.0)
    xm = max(-y0, 0.0) / lam
    vp = _pos_part(b, alpha)
    vm = _pos_part(-b, alpha)
    count = 0
    j = 0
    k = 0
    while True:
        if abs(b) < band:
            count += 1
            ell = unit * count
            while j < nl and ell > levels[j]:
                idx[j] = k
                ypos[j] = xp
                yneg[j] = xm
                j += 1
            if j == nl:
                break
        if k == n_steps:
            break
        k += 1
        bn = b + s * gen.standard_normal()
        vpn = _pos_part(bn, alpha)
        vmn = _pos_part(-bn, alpha)
        xp = xp + h * (vp + vpn)
        xm = xm + h * (vm + vmn)
        b = bn
        vp = vpn
        vm = vmn
    return idx, ypos, yneg


@njit(cache=True)
def key_inequality_path(gen, alpha, lam, lower, upper, x0, y0, dt, n_steps, band):
    """Streaming form of the check T >= tau(Theta-) on the full band trace.

    Returns (verdict, exit_time, tau_before_theta, steps_used).
    """
    s = math.sqrt(dt)
    h = 0.5 * dt
    b = x0
    x = y0
    v = kernel_value(b, alpha, lam)
    t_exit = np.nan
    last_tau = 0.0
    exited = not (lower < y0 < upper)
    if exited:
        t_exit = 0.0
    k = 0
    while True:
        if abs(b) < band:
            inside = lower < x < upper
            if exited:
                if inside:
                    return FAILS, t_exit, k * dt, k
                return HOLDS, t_exit, last_tau, k
            last_tau = k * dt
        if k == n_steps:
            return UNRESOLVED, t_exit, last_tau, k
        k += 1
        bn = b + s * gen.standard_normal()
        vn = kernel_value(bn, alpha, lam)
        xn = x + h * (v + vn)
        if not exited and (xn >= upper or xn <= lower):
            barrier = upper if xn >= upper else lower
            t_exit = (k - 1 + (barrier - x) / (xn - x)) * dt
            exited = True
        b = bn
        x = xn
        v = vn


@njit(cache=True)
def running_sup_path(gen, alpha, lam, x0, y0, dt, checkpoint_idx):
    """max_{j<=k} |X_j| at each (sorted) checkpoint grid index."""
    n_cp = checkpoint_idx.size
    out = np.empty(n_cp)
    s = math.sqrt(dt)
    h = 0.5 * dt
    b = x0
    x = y0
    m = abs(x)
    v = kernel_value(b, alpha, lam)
    j = 0
    while j < n_cp and checkpoint_idx[j] == 0:
        out[j] = m
        j += 1
    k = 0
    while j < n_cp:
        k += 1
        bn = b + s * gen.standard_normal()
        vn = kernel_value(bn, alpha, lam)
        x = x + h * (v + vn)
        ax = abs(x)
        if ax > m:
            m = ax
        b = bn
        v = vn
        while j < n_cp and checkpoint_idx[j] == k:
            out[j] = m
            j += 1
    return out


@njit(cache=True)
def endpoint_path(gen, alpha, lam, x0, y0, dt, n_steps):
    """(B, X) at grid index ``n_steps``."""
    s = math.sqrt(dt)
    h = 0.5 * dt
    b = x0
    x = y0
    v = kernel_value(b, alpha, lam)
    for _ in range(n_steps):
        bn = b + s * gen.standard_normal()
        vn = kernel_value(bn, alpha, lam)
        x = x + h * (v + vn)
        b = bn
        v = vn
    return b, x
