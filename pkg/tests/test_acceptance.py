"""Acceptance suite at full sample sizes (about ten minutes on one core).

Each criterion prints a PASS/FAIL line as it finishes, and the lines are
repeated together in the terminal summary.
"""
import json
import math
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from test_cli import SMOKE_CONFIGS, csv_bodies, invoke

from brownfunc import checks, cli
from brownfunc.checks import CheckResult
from brownfunc.exit_sampler import ORIGIN, sample_exits, survival_fraction
from brownfunc.kernel_path import PathSpec

SIZES = checks.FULL


def report(res):
    line = res.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert res.passed, line


@pytest.fixture(scope="module")
def tail():
    return checks.check_tail_linearity(SIZES)


@pytest.fixture(scope="module")
def rate_fit(tail):
    fit = tail.details.get("fit")
    if fit is None:
        pytest.fail("criterion 1 produced no rate fit")
    return fit


@pytest.fixture(scope="module")
def phi_tables():
    return {}


def test_criterion_01_tail_linearity(tail):
    report(tail)


def test_criterion_02_smallball_identity():
    report(checks.check_smallball_identity(SIZES))


def test_criterion_03_rate_consistency(rate_fit):
    report(checks.check_rate_consistency(SIZES, rate_fit))


def test_criterion_04_self_similarity():
    report(checks.check_self_similarity(SIZES))


def test_criterion_05_rate_scaling(rate_fit):
    report(checks.check_rate_scaling(SIZES, rate_fit))


def test_criterion_06_submultiplicativity(phi_tables):
    res = checks.check_submultiplicativity(SIZES, tables=phi_tables)
    phi_tables["times"] = res.details["times"]
    report(res)


def test_criterion_07_anderson(phi_tables):
    shared = None
    if "sym" in phi_tables:
        shared = {"sym": (phi_tables["sym"], phi_tables["times"])}
    report(checks.check_anderson(SIZES, tables=shared))


def test_criterion_08_key_inequality():
    report(checks.check_key_inequality(SIZES))


def test_criterion_09_levy_indices():
    report(checks.check_levy_indices(SIZES))


def test_criterion_10_synthetic_calibration():
    report(checks.check_synthetic_calibration(SIZES))


def test_criterion_11_cli_determinism(tmp_path):
    start = time.perf_counter()
    mismatched = []
    for op in SMOKE_CONFIGS:
        codes = [invoke(tmp_path, op, f"{op}-w{w}", workers=w) for w in (1, 8)]
        bodies = [csv_bodies(tmp_path / f"{op}-w{w}") for w in (1, 8)]
        summaries = [json.loads((tmp_path / f"{op}-w{w}" / "summary.json").read_text())
                     for w in (1, 8)]
        same = (codes[0] == codes[1] and codes[0] in (cli.EXIT_OK, cli.EXIT_CHECK_FAILED)
                and bodies[0] and bodies[0] == bodies[1] and summaries[0] == summaries[1])
        if not same:
            mismatched.append(op)
    elapsed = time.perf_counter() - start
    ok = not mismatched and elapsed <= 60.0
    stat = (f"{len(SMOKE_CONFIGS) - len(mismatched)}/{len(SMOKE_CONFIGS)} subcommands identical"
            + (f" (differ: {', '.join(mismatched)})" if mismatched else ""))
    report(CheckResult(11, "CLI determinism", stat, "identical CSVs for workers 1 and 8, <=60s",
                       ok, seconds=elapsed))


def test_criterion_12_lil(rate_fit):
    report(checks.check_lil(SIZES, rate_fit))


def test_survival_at_one_against_fine_grid(tail):
    # P[T > 1] from the criterion-1 run versus a dt = 1e-5 reference
    curve = tail.details["curve"]
    i = int(np.argmin(np.abs(curve.t_grid - 1.0)))
    assert abs(curve.t_grid[i] - 1.0) < 1e-9
    p, n = curve.p_hat[i], curve.n
    ref = sample_exits(*checks.SYM, ORIGIN, PathSpec(1e-5, 1.0, SIZES.seed + 5), 100_000)
    k, m = survival_fraction(ref, 1.0)
    q = k / m
    sigma = math.sqrt(p * (1 - p) / n + q * (1 - q) / m)
    lo, hi = curve.ci_low[i], curve.ci_high[i]
    print(f"P[T>1]: dt=1e-4 {p:.5f} [{lo:.5f}, {hi:.5f}] (n={n}), dt=1e-5 {q:.5f} (n={m}), "
          f"z={(p - q) / sigma:+.2f}")
    assert abs(p - q) <= 3 * sigma
