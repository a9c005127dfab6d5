"""CSV emission with stable, versioned schemas and round-trip float formatting."""

import csv
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

SCHEMAS = {
    "exits": ("replicate", "status", "exit_time", "side", "b_at_exit"),
    "survival_table": ("t", "survivors", "n", "p_hat", "ci_low", "ci_high"),
    "ratefit": ("k_hat", "stderr", "r_squared", "t_min", "t_max", "n_points", "intercept"),
    "smallball_table": ("eps", "abscissa", "count", "n", "q_hat"),
    "phi": ("x", "y", "t", "count", "n", "p_hat", "ci_low", "ci_high"),
    "submult": ("x", "y", "surv_s", "surv_t", "surv_st", "n"),
    "anderson": ("x", "y", "p_hat", "p_origin", "pooled_sigma", "dominated"),
    "logconcavity": ("x1", "y1", "xm", "ym", "x2", "y2", "log_mid", "log_chord", "sigma",
                     "violation"),
    "levy": ("replicate", "level", "tau", "y_pos", "y_neg", "y"),
    "keyineq": ("replicate", "verdict", "exit_time", "tau_before_theta"),
    "lil_table": ("replicate", "checkpoint", "sup", "ratio", "running_min"),
    "selfcheck": ("criterion", "statistic", "target", "passed"),
    # plot data
    "survival": ("t", "log_p_hat", "log_ci_low", "log_ci_high"),
    "ratefit_plot": ("t", "log_p_hat", "fitted_log_p", "in_window"),
    "smallball": ("abscissa", "log_q_hat", "log_ci_low", "log_ci_high"),
    "lil": ("replicate", "checkpoint", "ratio", "running_min"),
}


def fmt(value):
    """Locale-independent, round-trip text for one cell."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(value)


def write_csv(path, schema, rows):
    """Write ``rows`` (iterable of sequences) under the named schema; returns row count."""
    header = SCHEMAS[schema]
    path = Path(path)
    count = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{schema}: row has {len(row)} cells, expected {len(header)}")
            w.writerow([fmt(v) for v in row])
            count += 1
    return count


def read_csv(path):
    """Parse a file written by :func:`write_csv` into (header, list of float rows)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        rows = [[_parse(c) for c in row] for row in r]
    return header, rows


def _parse(cell):
    try:
        return float(cell)
    except ValueError:
        return cell
