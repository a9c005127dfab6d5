"""Command-line runner: ``brownfunc <subcommand> --config <file>``.

Every subcommand reads one flat JSON config, writes CSV files plus
``summary.json`` and ``manifest.json`` into the output directory, and exits
with 0 (ok), 1 (selfcheck failure), 2 (invalid config) or 3 (I/O error).
"""

import argparse
import datetime as _dt
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import checks
from . import estimators as est
from . import levy_bridge as lb
from . import lil_suite as lil
from .config import OPERATIONS, load_config
from .exit_sampler import Side, StartState, Status, sample_exits
from .kernel_path import ConfigError
from .output import write_csv
from .parallel import split_range
from .plotdata import emit_plotdata

OUTPUT_ENV = "BROWNFUNC_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3

ANDERSON_STARTS = ((1.0, 0.0), (-1.0, 0.0), (0.0, 0.5), (0.0, -0.5), (5.0, 0.0))
AXIS_TRIPLES = (((-2.0, 0.0), (0.0, 0.0)), ((-1.0, 0.0), (1.0, 0.0)),
                ((0.0, 0.0), (2.0, 0.0)), ((-2.0, 0.0), (2.0, 0.0)))


class Run:
    """Output bookkeeping for one invocation."""

    def __init__(self, cfg, out_dir):
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.files = []
        self.summary = {}
        self.status = EXIT_OK

    def csv(self, name, schema, rows):
        count = write_csv(self.out_dir / name, schema, rows)
        self.files.append({"file": name, "schema": schema, "rows": count})
        return count

    def plot(self, name, results, kind):
        count = emit_plotdata(results, kind, self.out_dir / name)
        self.files.append({"file": name, "schema": kind, "rows": count})
        return count


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, StartState):
        return [obj.x, obj.y]
    return obj


def _starts(cfg, default):
    return cfg.start_list() if cfg.starts is not None else list(default)


def _exit_batch(cfg, start=None, horizon=None):
    lower = upper = None
    if cfg.unilateral == "lower":
        upper = math.inf
    elif cfg.unilateral == "upper":
        lower = -math.inf
    spec = cfg.spec if horizon is None else cfg.spec.with_horizon(horizon)
    return sample_exits(cfg.kernel, cfg.window, cfg.start if start is None else start, spec,
                        cfg.replicates, workers=cfg.workers, lower=lower, upper=upper)


# ----------------------------------------------------------------- operations


def op_simulate_exit(run):
    cfg = run.cfg
    batch = _exit_batch(cfg)
    run.csv("exits.csv", "exits",
            zip(range(len(batch)), batch.status, batch.exit_time, batch.side, batch.b_at_exit))
    run.summary.update(n=len(batch), censored=batch.n_censored,
                       upper=int(np.count_nonzero(batch.side == Side.UPPER)),
                       lower=int(np.count_nonzero(batch.side == Side.LOWER)))
    exited = batch.exit_time[batch.status == Status.EXITED]
    run.summary["mean_exit_time"] = float(exited.mean()) if exited.size else math.nan


def _tail_grid(cfg):
    step = cfg.t_grid_step
    grid = np.arange(1, int(math.floor(cfg.horizon / step + 1e-9)) + 1) * step
    return grid[grid <= cfg.horizon]


def op_tail_fit(run):
    cfg = run.cfg
    batch = _exit_batch(cfg)
    curve = est.build_survival_curve(batch, _tail_grid(cfg), cfg.ci_level)
    rows = zip(curve.t_grid, curve.survivors, [curve.n] * curve.t_grid.size, curve.p_hat,
               curve.ci_low, curve.ci_high)
    run.csv("survival_table.csv", "survival_table", rows if curve.n else [])
    run.summary.update(n=curve.n, censored=curve.censored_beyond)
    try:
        fit = est.estimate_rate(curve, cfg.t_min, cfg.t_max)
    except est.FitError as exc:
        run.summary["fit"] = None
        run.summary["fit_error"] = str(exc)
        run.csv("ratefit.csv", "ratefit", [])
        run.plot("plot_survival.csv", curve if curve.n else None, "survival")
        run.plot("plot_ratefit.csv", None, "ratefit")
        return
    run.csv("ratefit.csv", "ratefit", [(fit.k_hat, fit.stderr, fit.r_squared, *fit.fit_window,
                                         fit.n_points, fit.intercept)])
    run.plot("plot_survival.csv", curve, "survival")
    run.plot("plot_ratefit.csv", (curve, fit), "ratefit")
    run.summary["fit"] = {"k_hat": fit.k_hat, "stderr": fit.stderr, "r_squared": fit.r_squared,
                          "fit_window": fit.fit_window, "n_points": fit.n_points}


def op_small_ball(run):
    cfg = run.cfg
    alpha = cfg.alpha
    if cfg.eps_list is not None:
        eps = np.asarray(cfg.eps_list, dtype=float)
    else:
        eps = est.eps_for_abscissa(np.linspace(2.0, 10.0, 9), alpha)
    # the supremum is always taken over [0, 1]
    spec = cfg.spec.with_horizon(1.0)
    s = eps ** (-cfg.kernel.time_exponent)
    if cfg.replicates == 0:
        run.csv("smallball_table.csv", "smallball_table", [])
        run.plot("plot_smallball.csv", None, "smallball")
        run.summary["fit"] = None
        return
    sups = est.sample_sup_norm(cfg.kernel, spec, cfg.replicates, cap=float(eps[0]),
                               workers=cfg.workers)
    counts = np.array([np.count_nonzero(sups < e) for e in eps])
    run.csv("smallball_table.csv", "smallball_table",
            zip(eps, s, counts, [cfg.replicates] * eps.size, counts / cfg.replicates))
    try:
        fit = est.small_ball_from_sups(cfg.kernel, eps, sups)
    except est.FitError as exc:
        run.plot("plot_smallball.csv", None, "smallball")
        run.summary.update(fit=None, fit_error=str(exc))
        return
    run.plot("plot_smallball.csv", fit, "smallball")
    run.summary["fit"] = {"k_prime": fit.k_prime, "stderr": fit.stderr,
                          "intercept": fit.intercept, "r_squared": fit.r_squared,
                          "dropped_eps": fit.dropped}


def _survival_counts(run, starts, times):
    cfg = run.cfg
    for st in starts:
        if not cfg.window.contains(st.y):
            raise ConfigError(f"start y={st.y} outside the window")
    if not starts:
        raise ConfigError("starts must be nonempty")
    if max(times) > cfg.horizon:
        raise ConfigError("requested time beyond the horizon")
    if cfg.replicates == 0:
        return None
    return est.survival_table(cfg.kernel, cfg.window, starts, times, cfg.replicates, cfg.spec,
                              cfg.workers)


def op_phi_sup(run):
    cfg = run.cfg
    starts = _starts(cfg, est.default_start_grid(cfg.kernel, cfg.window))
    counts = _survival_counts(run, starts, [cfg.t])
    if counts is None:
        run.csv("phi.csv", "phi", [])
        run.summary["sup"] = None
        return
    phi = est._phi_from_counts(cfg.t, starts, counts[:, 0], cfg.replicates, cfg.ci_level)
    run.csv("phi.csv", "phi", ((st.x, st.y, cfg.t, k, cfg.replicates, p, lo, hi)
                               for st, k, p, lo, hi in zip(starts, counts[:, 0], phi.p_hat,
                                                           phi.ci_low, phi.ci_high)))
    run.summary.update(t=cfg.t, sup=phi.sup, argmax=phi.argmax, sigma=phi.sigma)


def op_submult(run):
    cfg = run.cfg
    starts = _starts(cfg, est.default_start_grid(cfg.kernel, cfg.window))
    s, t = cfg.s, cfg.t
    times = [s, t, s + t]
    counts = _survival_counts(run, starts, times)
    if counts is None:
        run.csv("submult.csv", "submult", [])
        run.summary["passed"] = None
        return
    n = cfg.replicates
    run.csv("submult.csv", "submult",
            ((st.x, st.y, *row, n) for st, row in zip(starts, counts.tolist())))
    ps, pt, pst = (est._phi_from_counts(tt, starts, counts[:, j], n, cfg.ci_level)
                   for j, tt in enumerate(times))
    sigma = math.sqrt(pst.sigma**2 + (pt.sup * ps.sigma) ** 2 + (ps.sup * pt.sigma) ** 2)
    bound = ps.sup * pt.sup
    run.summary.update(s=s, t=t, phi_s=ps.sup, phi_t=pt.sup, phi_st=pst.sup, bound=bound,
                       sigma=sigma, passed=pst.sup <= bound + cfg.z_level * sigma)


def op_anderson(run):
    cfg = run.cfg
    starts = _starts(cfg, [StartState(x, y) for x, y in ANDERSON_STARTS])
    if cfg.t > cfg.horizon:
        raise ConfigError("t beyond the horizon")
    if cfg.replicates == 0:
        est.require_gaussian_symmetric(cfg.kernel, cfg.window)
        run.csv("anderson.csv", "anderson", [])
        run.summary["passed"] = None
        return
    rep = est.anderson_check(cfg.kernel, cfg.window, starts, cfg.t, cfg.replicates, cfg.spec,
                             cfg.z_level, cfg.workers)
    run.csv("anderson.csv", "anderson",
            ((st.x, st.y, p, rep.p_origin, sg, d)
             for st, p, sg, d in zip(starts, rep.p_hat, rep.pooled_sigma, rep.dominated)))
    run.summary.update(t=cfg.t, p_origin=rep.p_origin, passed=rep.passed)


def op_logconcavity(run):
    cfg = run.cfg
    triples = cfg.triples if cfg.triples is not None else AXIS_TRIPLES
    if cfg.replicates == 0:
        run.csv("logconcavity.csv", "logconcavity", [])
        run.summary["passed"] = None
        return
    rep = est.logconcavity_probe(cfg.kernel, cfg.window, triples, cfg.t, cfg.replicates,
                                 cfg.spec, cfg.z_level, cfg.workers)
    run.csv("logconcavity.csv", "logconcavity",
            ((p.x, p.y, m.x, m.y, q.x, q.y, lm, lc, sg, j in rep.violations)
             for j, ((p, m, q), lm, lc, sg) in enumerate(
                 zip(rep.triples, rep.log_mid, rep.log_chord, rep.sigma))))
    run.summary.update(t=cfg.t, violations=len(rep.violations), exploratory=rep.exploratory,
                       passed=rep.passed)


def _levy_rows(ens):
    y = ens.y
    for r in range(ens.tau.shape[0]):
        for j, level in enumerate(ens.levels):
            yield r, level, ens.tau[r, j], ens.y_pos[r, j], ens.y_neg[r, j], y[r, j]


def op_levy_check(run):
    cfg = run.cfg
    kernel, n = cfg.kernel, cfg.replicates
    ens = lb.sample_levy_ensemble(kernel, cfg.spec, n, cfg.levels, cfg.band, workers=cfg.workers)
    run.csv("levy.csv", "levy", _levy_rows(ens))
    key = lb.key_inequality_batch(kernel, cfg.window, cfg.spec, n, cfg.band, offset=n,
                                  workers=cfg.workers)
    run.csv("keyineq.csv", "keyineq",
            ((n + i, lb.verdict_name(v), t, tau)
             for i, (v, t, tau) in enumerate(zip(key.verdicts, key.exit_time,
                                                 key.tau_before_theta))))
    run.summary["key_inequality"] = {"resolved": key.resolved, "holds": key.holds,
                                     "fails": key.fails, "hold_fraction": key.hold_fraction}
    tau_slope, _ = lb.tau_scaling(ens) if n else (math.nan, None)
    stab = lb.stability_checks(ens, cfg.alpha)
    run.summary["tau_slope"] = tau_slope
    run.summary["stability"] = {"sufficient": stab.sufficient, "slope": stab.slope,
                                "expected_slope": stab.expected_slope,
                                "ks_pvalue": stab.ks_pvalue, "message": stab.message}
    positivity = {}
    lams = [None] if cfg.compare_lam is None else [None, cfg.compare_lam]
    for lam in lams:
        label = f"lam={kernel.lam if lam is None else lam:g}"
        try:
            pe = lb.positivity_estimate(ens, lam=lam)
        except ValueError as exc:
            positivity[label] = {"error": str(exc)}
            continue
        positivity[label] = {"per_level": pe.per_level, "sigma": pe.sigma, "pooled": pe.pooled,
                             "pooled_sigma": pe.pooled_sigma, "max_gap_z": pe.max_gap_z}
    run.summary["positivity"] = positivity


def op_lil(run):
    cfg = run.cfg
    cps = (np.asarray(cfg.checkpoints, dtype=float) if cfg.checkpoints is not None
           else lil.geometric_checkpoints(cfg.horizon))
    if cps.size == 0:
        raise ConfigError("no checkpoints below the horizon")
    ens = lil.lil_ensemble(cfg.kernel, cfg.spec, cps, cfg.replicates, workers=cfg.workers)
    run.csv("lil_table.csv", "lil_table",
            ((r, c, s, q, m) for r, tr in enumerate(ens)
             for c, s, q, m in zip(tr.checkpoints, tr.sup_values, tr.ratios, tr.running_min)))
    run.plot("plot_lil.csv", ens, "lil")
    if cfg.k_hat is not None:
        cmp = lil.lil_constant_comparison(ens, cfg.k_hat, cfg.alpha, tuple(cfg.deltas))
        run.summary.update(target=cmp.target, fraction_below=cmp.fraction_below,
                           quantiles=cmp.quantiles)
    else:
        run.summary["target"] = None


def op_selfcheck(run):
    cfg = run.cfg
    sizes = replace(checks.scaled(checks.SMOKE, cfg.scale), workers=cfg.workers)
    results = checks.run_all(sizes, log=lambda line: print(line, file=sys.stderr))
    run.csv("selfcheck.csv", "selfcheck",
            ((r.criterion, r.statistic, r.target, r.passed) for r in results))
    run.summary["criteria"] = {str(r.criterion): r.passed for r in results}
    run.summary["passed"] = all(r.passed for r in results)
    if not run.summary["passed"]:
        run.status = EXIT_CHECK_FAILED


HANDLERS = {
    "simulate-exit": op_simulate_exit,
    "tail-fit": op_tail_fit,
    "small-ball": op_small_ball,
    "phi-sup": op_phi_sup,
    "submult": op_submult,
    "anderson": op_anderson,
    "logconcavity": op_logconcavity,
    "levy-check": op_levy_check,
    "lil": op_lil,
    "selfcheck": op_selfcheck,
}
assert set(HANDLERS) == set(OPERATIONS)


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(cfg, operation, out_dir):
    """Execute ``operation`` and persist outputs; returns (exit code, manifest dict)."""
    started = _now()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = Run(cfg, out_dir)
    HANDLERS[operation](state)
    summary = {"operation": operation, "config_hash": cfg.hash(), **state.summary}
    _write_json(out_dir / "summary.json", summary)
    ranges = split_range(cfg.replicates, cfg.workers) if cfg.replicates else []
    manifest = {
        "operation": operation,
        "config_hash": cfg.hash(),
        "version": __version__,
        "started": started,
        "finished": _now(),
        "workers": cfg.workers,
        "seed": cfg.seed,
        "seed_derivation": "Philox key (seed, global replicate index)",
        "worker_ranges": [{"worker": w, "first": lo, "stop": hi}
                          for w, (lo, hi) in enumerate(ranges)],
        "outputs": state.files,
        "exit_code": state.status,
    }
    _write_json(out_dir / "manifest.json", manifest)
    return state.status, manifest


def build_parser():
    parser = argparse.ArgumentParser(prog="brownfunc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("subcommand", choices=OPERATIONS)
    parser.add_argument("--config", required=True, help="JSON config file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.operation is not None and cfg.operation != args.subcommand:
            raise ConfigError(f"config is for {cfg.operation!r}, not {args.subcommand!r}")
        out_dir = os.environ.get(OUTPUT_ENV) or cfg.output_dir
        code, _ = run(cfg, args.subcommand, out_dir)
    except ConfigError as exc:
        print(f"brownfunc: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"brownfunc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
