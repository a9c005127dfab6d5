"""Plot-ready two-column (plus band) CSV files."""

import numpy as np

from .estimators import RateFit, SmallBallFit, SurvivalCurve, admissible_mask
from .lil_suite import LilTrace
from .output import write_csv
from .stats import wilson_interval

KINDS = ("survival", "ratefit", "smallball", "lil")


def _log(v):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(v, dtype=float))


def _survival_rows(curve):
    return zip(curve.t_grid, _log(curve.p_hat), _log(curve.ci_low), _log(curve.ci_high))


def _ratefit_rows(results):
    curve, fit = results
    if not isinstance(curve, SurvivalCurve) or not isinstance(fit, RateFit):
        raise TypeError("ratefit plot data needs a (SurvivalCurve, RateFit) pair")
    t0, t1 = fit.fit_window
    fitted = fit.intercept - fit.k_hat * curve.t_grid
    inside = (curve.t_grid >= t0) & (curve.t_grid <= t1)
    return zip(curve.t_grid, _log(curve.p_hat), fitted, inside)


def _smallball_rows(fit):
    lo, hi = wilson_interval(fit.counts, fit.n)
    order = np.argsort(fit.abscissa)
    return ((fit.abscissa[i], _log(fit.q_hat[i]), _log(lo[i]), _log(hi[i])) for i in order)


def _lil_rows(traces):
    for r, tr in enumerate(traces):
        if not isinstance(tr, LilTrace):
            raise TypeError("lil plot data needs LilTrace objects")
        for c, ratio, m in zip(tr.checkpoints, tr.ratios, tr.running_min):
            yield r, c, ratio, m


def emit_plotdata(results, kind, path):
    """Write plot data for ``kind``; ``None`` or an empty list gives a header-only file.

    survival:  (t, log p_hat, log ci_low, log ci_high)
    ratefit:   (t, log p_hat, fitted log p, in_window) from (curve, fit)
    smallball: (eps**(-2/(alpha+2)), log q_hat, log ci_low, log ci_high)
    lil:       (replicate, checkpoint, ratio, running_min)
    """
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}")
    empty = results is None or (isinstance(results, (list, tuple)) and len(results) == 0)
    if empty:
        rows = []
    elif kind == "survival":
        if not isinstance(results, SurvivalCurve):
            raise TypeError("survival plot data needs a SurvivalCurve")
        rows = _survival_rows(results)
    elif kind == "ratefit":
        rows = _ratefit_rows(results)
    elif kind == "smallball":
        if not isinstance(results, SmallBallFit):
            raise TypeError("smallball plot data needs a SmallBallFit")
        rows = _smallball_rows(results)
    else:
        if not isinstance(results, (list, tuple)):
            raise TypeError("lil plot data needs a list of LilTrace")
        rows = _lil_rows(results)
    schema = "ratefit_plot" if kind == "ratefit" else kind
    return write_csv(path, schema, rows)
