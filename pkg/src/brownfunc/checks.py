"""Acceptance criteria as runnable checks.

Each ``check_*`` function simulates what it needs, evaluates one criterion
and returns a :class:`CheckResult`.  :data:`FULL` holds the acceptance sizes;
:data:`SMOKE` is a reduced profile for ``brownfunc selfcheck``.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import estimators as est
from . import levy_bridge as lb
from . import lil_suite as lil
from .exit_sampler import ORIGIN, ExitBatch, StartState, Window, sample_exits
from .kernel_path import Kernel, PathSpec, sample_endpoints, sample_path
from .stats import ks_two_sample, two_proportion


@dataclass(frozen=True)
class Sizes:
    tail_n: int = 1_000_000
    tail_dt: float = 1e-4
    tail_horizon: float = 50.0
    half_window_n: int = 200_000
    identity_n: int = 100_000
    identity_dt: float = 1e-4
    smallball_n: int = 100_000
    smallball_dt: float = 1e-4
    selfsim_n: int = 10_000
    selfsim_dt: float = 1e-3
    phi_n: int = 50_000
    phi_dt: float = 1e-3
    anderson_n: int = 100_000
    key_n: int = 10_000
    key_dt: float = 1e-4
    key_horizon: float = 50.0
    levy_n: int = 10_000
    levy_dt: float = 1e-3
    levy_horizon: float = 200.0
    synthetic_n: int = 1_000_000
    lil_n: int = 1_000
    lil_dt: float = 1e-2
    lil_horizon: float = 1e4
    seed: int = 20240601
    workers: int = 1


FULL = Sizes()
SMOKE = Sizes(tail_n=40_000, tail_dt=1e-3, half_window_n=40_000, identity_n=20_000,
              identity_dt=1e-3, smallball_n=40_000, smallball_dt=1e-3,
              phi_n=5_000, anderson_n=10_000, key_n=2_000, key_dt=1e-3, levy_n=3_000,
              levy_horizon=100.0, synthetic_n=100_000, lil_n=200, lil_dt=2e-2,
              lil_horizon=2e3)


def scaled(sizes, factor):
    """Multiply every replicate count by ``factor`` (at least 100 each)."""
    counts = {f: max(100, int(round(getattr(sizes, f) * factor)))
              for f in sizes.__dataclass_fields__ if f.endswith("_n")}
    return replace(sizes, **counts)


@dataclass
class CheckResult:
    criterion: int
    name: str
    statistic: str
    target: str
    passed: bool
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] criterion {self.criterion:2d} {self.name}: {self.statistic} "
                f"(target {self.target}) [{self.seconds:.1f}s]")


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


SYM = (Kernel(1.0, 1.0), Window(1.0, 1.0))
ASYM = (Kernel(2.0, 0.5), Window(1.0, 2.0))


def tail_curve(kernel, window, n, dt, horizon, seed, offset=0, workers=1, step=0.05):
    batch = sample_exits(kernel, window, ORIGIN, PathSpec(dt, horizon, seed), n, offset=offset,
                         workers=workers)
    grid = np.arange(step, horizon + step / 2, step)
    grid = grid[grid <= horizon]
    return est.build_survival_curve(batch, grid)


@_timed
def check_tail_linearity(sizes=FULL, curve=None):
    """1. Weighted log-survival fit is linear with a tight positive rate."""
    if curve is None:
        curve = tail_curve(*SYM, sizes.tail_n, sizes.tail_dt, sizes.tail_horizon, sizes.seed,
                           workers=sizes.workers)
    fit = est.estimate_rate(curve)
    rel = fit.stderr / fit.k_hat if fit.k_hat > 0 else math.inf
    ok = fit.r_squared >= 0.99 and fit.k_hat > 0 and rel < 0.05
    lo, hi = fit.fit_window
    return CheckResult(1, "exponential tail", f"k_hat={fit.k_hat:.5f} stderr/k={rel:.4f} "
                       f"r2={fit.r_squared:.5f} window=[{lo:g}, {hi:g}]",
                       "r2>=0.99, k>0, stderr/k<5%", ok, details={"fit": fit, "curve": curve})


@_timed
def check_smallball_identity(sizes=FULL, eps_values=(0.6, 0.7, 0.8), z_level=3.0):
    """2. q(eps) = P[T_11 > eps**(-2/(alpha+2))] within z_level pooled sigmas."""
    kernel = SYM[0]
    n = sizes.identity_n
    spec = PathSpec(sizes.identity_dt, 1.0, sizes.seed + 2)
    eps = np.asarray(eps_values, dtype=float)
    sups = est.sample_sup_norm(kernel, spec, n, cap=float(eps.max()), workers=sizes.workers)
    s = eps ** (-kernel.time_exponent)
    batch = sample_exits(kernel, Window(1.0, 1.0), ORIGIN, spec.with_horizon(float(s.max())), n,
                         offset=n, workers=sizes.workers)
    rows = []
    ok = True
    for e, ss in zip(eps, s):
        k1 = int(np.count_nonzero(sups < e))
        k2 = est.survival_fraction(batch, ss)[0]
        cmp = two_proportion(k1, n, k2, n)
        rows.append((float(e), cmp.p1, cmp.p2, cmp.z))
        ok &= abs(cmp.z) <= z_level
    stat = "; ".join(f"eps={e}: q={a:.4f} vs {b:.4f} (z={z:+.2f})" for e, a, b, z in rows)
    return CheckResult(2, "small-ball identity", stat, f"|z|<={z_level}", ok,
                       details={"rows": rows})


@_timed
def check_rate_consistency(sizes=FULL, rate_fit=None, tol=0.15):
    """3. Small-ball exponent agrees with the exit-rate fit within ``tol``."""
    kernel = SYM[0]
    if rate_fit is None:
        rate_fit = check_tail_linearity(sizes).details["fit"]
    eps = est.eps_for_abscissa(np.linspace(2.0, 10.0, 9), kernel.alpha)
    fit = est.small_ball_fit(kernel, eps, sizes.smallball_n,
                             PathSpec(sizes.smallball_dt, 1.0, sizes.seed + 3),
                             workers=sizes.workers)
    rel = abs(fit.k_prime - rate_fit.k_hat) / rate_fit.k_hat
    return CheckResult(3, "K' = K_1", f"K'={fit.k_prime:.5f} K1={rate_fit.k_hat:.5f} "
                       f"rel diff={rel:.4f} r2={fit.r_squared:.4f}", f"<{tol:.0%}", rel < tol,
                       details={"smallball": fit, "rate": rate_fit})


@_timed
def check_self_similarity(sizes=FULL, scales=(2.0, 4.0), alphas=(1.0, 2.0), p_min=0.01):
    """4. c**(-(1+alpha/2)) X_c has the law of X_1 (two-sample KS)."""
    n = sizes.selfsim_n
    rows = []
    ok = True
    for ia, alpha in enumerate(alphas):
        kernel = Kernel(alpha, 1.0)
        seed = sizes.seed + 40 + ia
        _, x1 = sample_endpoints(kernel, PathSpec(sizes.selfsim_dt, 1.0, seed), n,
                                 workers=sizes.workers)
        for ic, c in enumerate(scales):
            _, xc = sample_endpoints(kernel, PathSpec(sizes.selfsim_dt, c, seed), n,
                                     offset=(ic + 1) * n, workers=sizes.workers)
            _, p = ks_two_sample(xc * c ** (-kernel.self_similarity_index), x1)
            rows.append((alpha, c, p))
            ok &= p > p_min
    stat = ", ".join(f"alpha={a:g} c={c:g}: p={p:.3f}" for a, c, p in rows)
    return CheckResult(4, "self-similarity KS", stat, f"p>{p_min}", ok, details={"rows": rows})


@_timed
def check_rate_scaling(sizes=FULL, rate_fit=None, tol=0.10):
    """5. k_hat(a=b=1/2) / k_hat(a=b=1) = 2**(2/(alpha+2))."""
    kernel = SYM[0]
    if rate_fit is None:
        rate_fit = check_tail_linearity(sizes).details["fit"]
    curve = tail_curve(kernel, Window(0.5, 0.5), sizes.half_window_n, sizes.tail_dt,
                       sizes.tail_horizon, sizes.seed + 5, workers=sizes.workers, step=0.025)
    half = est.estimate_rate(curve)
    target = 2.0 ** kernel.time_exponent
    ratio = half.k_hat / rate_fit.k_hat
    rel = abs(ratio / target - 1.0)
    return CheckResult(5, "symmetric-rate scaling", f"ratio={ratio:.4f} vs {target:.4f} "
                       f"(rel {rel:.4f})", f"within {tol:.0%}", rel < tol,
                       details={"half": half, "ratio": ratio})


GAUSS_GRID = [StartState(x, y) for x in (-2.0, -1.0, 0.0, 1.0, 2.0) for y in (-0.5, 0.0, 0.5)]


def _phi_table(kernel, window, starts, times, n, dt, seed, workers):
    return est.survival_table(kernel, window, starts, times, n,
                              PathSpec(dt, max(times), seed), workers)


@_timed
def check_submultiplicativity(sizes=FULL, pairs=((2.0, 3.0), (1.0, 2.0)), z_level=3.0,
                              tables=None):
    """6. phi(s+t) <= phi(s) phi(t) + 3 sigma, symmetric and asymmetric kernels."""
    times = sorted({v for s, t in pairs for v in (s, t, s + t)})
    configs = {
        "sym": (SYM[0], SYM[1], GAUSS_GRID),
        "asym": (ASYM[0], ASYM[1], est.default_start_grid(*ASYM)),
    }
    tables = {} if tables is None else tables
    rows = []
    ok = True
    n = sizes.phi_n
    for ic, (label, (kernel, window, grid)) in enumerate(configs.items()):
        if label not in tables:
            tables[label] = _phi_table(kernel, window, grid, times, n, sizes.phi_dt,
                                       sizes.seed + 60 + ic, sizes.workers)
        counts = tables[label]
        phi = {}
        for j, tt in enumerate(times):
            phi[tt] = est._phi_from_counts(tt, grid, counts[:, j], n, 0.95)
        for s, t in pairs:
            ps, pt, pst = phi[s], phi[t], phi[s + t]
            sigma = math.sqrt(pst.sigma**2 + (pt.sup * ps.sigma) ** 2 + (ps.sup * pt.sigma) ** 2)
            holds = pst.sup <= ps.sup * pt.sup + z_level * sigma
            rows.append((label, s, t, pst.sup, ps.sup * pt.sup, sigma, holds))
            ok &= holds
    stat = "; ".join(f"{lb_} ({s:g},{t:g}): {a:.4f} <= {b:.4f} (+3s={3 * sg:.4f})"
                     for lb_, s, t, a, b, sg, _ in rows)
    return CheckResult(6, "submultiplicativity", stat, "phi(s+t) <= phi(s)phi(t) + 3 sigma", ok,
                       details={"rows": rows, "tables": tables, "times": times})


@_timed
def check_anderson(sizes=FULL, tables=None, z_level=3.0):
    """7. Off-origin starts are dominated by (0,0); argmax over the grid is (0,0)."""
    kernel, window = SYM
    starts = [StartState(1, 0), StartState(-1, 0), StartState(0, 0.5), StartState(0, -0.5),
              StartState(5, 0)]
    rep = est.anderson_check(kernel, window, starts, 2.0, sizes.anderson_n,
                             PathSpec(sizes.phi_dt, 2.0, sizes.seed + 70), z_level=z_level,
                             workers=sizes.workers)
    if tables is not None and "sym" in tables:
        counts = tables["sym"][0][:, tables["sym"][1].index(2.0)]
        phi = est._phi_from_counts(2.0, GAUSS_GRID, counts, sizes.phi_n, 0.95)
    else:
        phi = est.phi_sup_estimate(kernel, window, GAUSS_GRID, 2.0, sizes.phi_n,
                                   PathSpec(sizes.phi_dt, 2.0, sizes.seed + 60),
                                   workers=sizes.workers)
    argmax_ok = phi.argmax == ORIGIN
    ok = rep.passed and argmax_ok
    stat = (f"P(0,0)={rep.p_origin:.4f}; "
            + ", ".join(f"({s.x:g},{s.y:g})={p:.4f}" for s, p in zip(rep.starts, rep.p_hat))
            + f"; argmax=({phi.argmax.x:g},{phi.argmax.y:g})")
    return CheckResult(7, "Anderson dominance", stat, "all dominated, argmax (0,0)", ok,
                       details={"report": rep, "phi": phi})


@_timed
def check_key_inequality(sizes=FULL, windows=(1.0, 0.05), min_fraction=0.999):
    """8. T >= tau(Theta-) on >= 99.9% of resolved paths."""
    kernel = SYM[0]
    rows = []
    ok = True
    for i, a in enumerate(windows):
        summ = lb.key_inequality_batch(kernel, Window(a, a),
                                       PathSpec(sizes.key_dt, sizes.key_horizon,
                                                sizes.seed + 80 + i),
                                       sizes.key_n, workers=sizes.workers)
        rows.append((a, summ.resolved, summ.fails, summ.hold_fraction))
        ok &= summ.resolved > 0 and summ.hold_fraction >= min_fraction
    stat = "; ".join(f"a=b={a:g}: {r} resolved, {f} fail, hold={h:.5f}" for a, r, f, h in rows)
    return CheckResult(8, "key inequality", stat, f">={min_fraction}", ok,
                       details={"rows": rows})


@_timed
def check_levy_indices(sizes=FULL, alphas=(1.0, 2.0), z_level=3.0):
    """9. tau slope 2 +- 0.2; |Y| slope alpha+2 +- 10%; positivity 1/2 at lam=1, < 1/2 at lam=4."""
    rows = []
    ok = True
    pos_info = None
    for ia, alpha in enumerate(alphas):
        ens = lb.sample_levy_ensemble(Kernel(alpha, 1.0),
                                      PathSpec(sizes.levy_dt, sizes.levy_horizon,
                                               sizes.seed + 90 + ia),
                                      sizes.levy_n, workers=sizes.workers)
        tau_slope, _ = lb.tau_scaling(ens)
        stab = lb.stability_checks(ens, alpha)
        tau_ok = abs(tau_slope - 2.0) <= 0.2
        y_ok = stab.sufficient and abs(stab.slope - (alpha + 2)) <= 0.1 * (alpha + 2)
        rows.append((alpha, tau_slope, stab.slope, tau_ok, y_ok))
        ok &= tau_ok and y_ok
        if alpha == 1.0:
            sym = lb.positivity_estimate(ens)
            heavy = lb.positivity_estimate(ens, lam=4.0)
            sym_ok = bool(np.all(np.abs(sym.per_level - 0.5) <= z_level * sym.sigma))
            heavy_ok = bool(np.all(heavy.per_level + z_level * heavy.sigma < 0.5))
            pos_info = (sym, heavy, sym_ok, heavy_ok)
            ok &= sym_ok and heavy_ok
    stat = "; ".join(f"alpha={a:g}: tau slope={t:.3f}, Y slope={y:.3f}" for a, t, y, *_ in rows)
    if pos_info:
        sym, heavy = pos_info[:2]
        stat += (f"; P[Y>0] lam=1: {np.round(sym.per_level, 4).tolist()}, "
                 f"lam=4: {np.round(heavy.per_level, 4).tolist()}")
    return CheckResult(9, "Levy-view indices", stat,
                       "tau 2+-0.2, Y alpha+2 +-10%, positivity 1/2 / <1/2", ok,
                       details={"rows": rows, "positivity": pos_info})


@_timed
def check_synthetic_calibration(sizes=FULL, rate=2.0):
    """10. Exponential(2) records through the pipeline recover the rate."""
    batch = ExitBatch.exponential(rate, sizes.synthetic_n, horizon=20.0, seed=sizes.seed + 100)
    curve = est.build_survival_curve(batch, np.arange(0.02, 10.0, 0.02))
    fit = est.estimate_rate(curve)
    z = (fit.k_hat - rate) / fit.stderr
    ok = abs(z) <= 3.0 and fit.r_squared > 0.999
    return CheckResult(10, "synthetic calibration", f"k_hat={fit.k_hat:.5f} stderr="
                       f"{fit.stderr:.5f} z={z:+.2f} r2={fit.r_squared:.6f}",
                       "|k-2|<=3 stderr, r2>0.999", ok, details={"fit": fit})


@_timed
def check_lil(sizes=FULL, rate_fit=None, alpha=1.0):
    """12. Bracketing fraction at delta=1 is positive; exact normalization identities."""
    kernel = Kernel(alpha, 1.0)
    if rate_fit is None:
        rate_fit = check_tail_linearity(sizes).details["fit"]
    spec = PathSpec(sizes.lil_dt, sizes.lil_horizon, sizes.seed + 120)
    cps = lil.geometric_checkpoints(sizes.lil_horizon)
    ens = lil.lil_ensemble(kernel, spec, cps, sizes.lil_n, workers=sizes.workers)
    cmp = lil.lil_constant_comparison(ens, rate_fit, alpha, deltas=(0.5, 1.0))
    ee = math.exp(math.e)
    f_err = abs(lil.lil_normalizer(ee, alpha) / ee ** ((alpha + 2) / 2) - 1.0)
    path = sample_path(kernel, PathSpec(0.01, 200.0, sizes.seed + 121))
    n = 100
    _, chung = lil.stretched_functional(path, n, "chung")
    _, strassen = lil.stretched_functional(path, n, "strassen")
    mask = strassen != 0
    expected = math.log(math.log(n)) ** (alpha + 2)
    ratio_err = float(np.max(np.abs(chung[mask] / strassen[mask] / expected - 1.0)))
    frac = cmp.fraction_below[1.0]
    ok = frac > 0 and f_err <= 1e-12 and ratio_err <= 1e-12
    return CheckResult(12, "LIL diagnostics", f"c*={cmp.target:.4f} frac<2c*={frac:.3f} "
                       f"frac<1.5c*={cmp.fraction_below[0.5]:.3f} f(e^e) err={f_err:.1e} "
                       f"ratio err={ratio_err:.1e}", "frac>0, identities to 1e-12", ok,
                       details={"comparison": cmp})


def _errored(criterion, name, exc):
    return CheckResult(criterion, name, f"error: {exc}", "completes without error", False)


def run_all(sizes=SMOKE, log=print, include=None):
    """Run the library-level criteria (the CLI determinism criterion lives in the tests)."""
    results = []

    def keep(res):
        if not isinstance(res, CheckResult):
            res = _errored(*res)
        results.append(res)
        if log:
            log(res.line())
        return res

    want = (lambda c: True) if include is None else (lambda c: c in include)

    def guarded(criterion, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, ArithmeticError) as exc:
            return criterion, fn.__name__, exc

    fit = None
    if want(1) or want(3) or want(5) or want(12):
        r1 = guarded(1, check_tail_linearity, sizes)
        if isinstance(r1, CheckResult):
            fit = r1.details["fit"]
        if want(1):
            keep(r1)
    if want(2):
        keep(guarded(2, check_smallball_identity, sizes))
    if want(3):
        keep(guarded(3, check_rate_consistency, sizes, fit))
    if want(4):
        keep(guarded(4, check_self_similarity, sizes))
    if want(5):
        keep(guarded(5, check_rate_scaling, sizes, fit))
    tables = {}
    if want(6):
        r6 = keep(guarded(6, check_submultiplicativity, sizes, tables=tables))
        if "tables" in r6.details:
            tables = {"sym": (r6.details["tables"]["sym"], r6.details["times"])}
    if want(7):
        keep(guarded(7, check_anderson, sizes, tables=tables or None))
    if want(8):
        keep(guarded(8, check_key_inequality, sizes))
    if want(9):
        keep(guarded(9, check_levy_indices, sizes))
    if want(10):
        keep(guarded(10, check_synthetic_calibration, sizes))
    if want(12):
        keep(guarded(12, check_lil, sizes, fit))
    return results
