import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brownfunc import estimators as est
from brownfunc.exit_sampler import (
    ORIGIN,
    ExitBatch,
    StartState,
    Status,
    Window,
    sample_exits,
    survival_fraction,
)
from brownfunc.kernel_path import ConfigError, Kernel, PathSpec

SYM = Kernel(1.0, 1.0)
W11 = Window(1.0, 1.0)
GRID = [StartState(x, y) for x in (-2.0, -1.0, 0.0, 1.0, 2.0) for y in (-0.5, 0.0, 0.5)]


def _batch(times, horizon):
    t = np.asarray(times, dtype=float)
    cens = t > horizon
    return ExitBatch(np.where(cens, Status.CENSORED, Status.EXITED).astype(np.int8),
                     np.where(cens, np.nan, t), np.zeros(t.size, dtype=np.int8),
                     np.full(t.size, np.nan), horizon)


def test_all_exited_at_zero():
    curve = est.build_survival_curve(_batch(np.zeros(20), 5.0), [0.5, 1.0])
    assert np.all(curve.p_hat == 0)


def test_all_censored():
    curve = est.build_survival_curve(_batch(np.full(20, np.inf), 5.0), [0.5, 1.0, 5.0])
    assert np.all(curve.p_hat == 1) and curve.censored_beyond == 20


def test_grid_beyond_horizon_rejected():
    with pytest.raises(ValueError):
        est.build_survival_curve(_batch([1.0], 2.0), [1.0, 3.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=60), st.randoms())
def test_survival_curve_permutation_invariant(times, rnd):
    grid = np.linspace(0.5, 8, 12)
    perm = list(times)
    rnd.shuffle(perm)
    a = est.build_survival_curve(_batch(times, 8.0), grid)
    b = est.build_survival_curve(_batch(perm, 8.0), grid)
    np.testing.assert_array_equal(a.survivors, b.survivors)
    assert np.all(np.diff(a.p_hat) <= 0)
    assert np.all(a.ci_low <= a.p_hat) and np.all(a.p_hat <= a.ci_high)


def test_survivor_counts_oracle():
    times = [0.1, 0.5, 0.5, 1.2, 3.0]
    curve = est.build_survival_curve(_batch(times, 4.0), [0.5, 1.0, 2.0])
    # exit_time > t counts as surviving
    np.testing.assert_array_equal(curve.survivors, [2, 2, 1])


def test_synthetic_exponential_curve_within_ci():
    batch = ExitBatch.exponential(2.0, 1_000_000, horizon=20.0, seed=4)
    grid = np.linspace(0.5, 3.0, 26)
    curve = est.build_survival_curve(batch, grid, level=0.999)
    truth = np.exp(-2 * grid)
    assert np.all((curve.ci_low <= truth) & (truth <= curve.ci_high))


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_synthetic_rate_recovery(seed):
    batch = ExitBatch.exponential(2.0, 200_000, horizon=20.0, seed=seed)
    fit = est.estimate_rate(est.build_survival_curve(batch, np.arange(0.02, 10, 0.02)))
    assert abs(fit.k_hat - 2) <= 3 * fit.stderr
    assert fit.r_squared > 0.999


def test_stderr_is_calibrated():
    # fraction of |k - 2| <= 3 stderr over seeds should be ~99.7%
    hits = 0
    trials = 100
    for s in range(trials):
        batch = ExitBatch.exponential(2.0, 20_000, horizon=20.0, seed=1000 + s)
        fit = est.estimate_rate(est.build_survival_curve(batch, np.arange(0.05, 10, 0.05)))
        hits += abs(fit.k_hat - 2) <= 3 * fit.stderr
    assert hits >= 97


def test_fit_window_respects_admissibility():
    batch = ExitBatch.exponential(1.0, 10_000, horizon=20.0, seed=9)
    curve = est.build_survival_curve(batch, np.arange(0.1, 20, 0.1))
    fit = est.estimate_rate(curve)
    inside = (curve.t_grid >= fit.fit_window[0]) & (curve.t_grid <= fit.fit_window[1])
    assert np.all(curve.survivors[inside] >= est.MIN_SURVIVORS)
    assert np.all(curve.p_hat[inside] <= est.P_START)
    assert fit.n_points == inside.sum()


def test_fit_window_override():
    batch = ExitBatch.exponential(1.0, 10_000, horizon=20.0, seed=9)
    curve = est.build_survival_curve(batch, np.arange(0.1, 20, 0.1))
    fit = est.estimate_rate(curve, t_min=0.95, t_max=3.05)
    assert fit.fit_window == pytest.approx((1.0, 3.0))


def test_censored_mass_excludes_tail():
    # heavy censoring: only early points qualify
    batch = ExitBatch.exponential(0.2, 10_000, horizon=5.0, seed=2)
    curve = est.build_survival_curve(batch, np.arange(0.1, 5.0, 0.1))
    with pytest.raises(est.FitError):
        est.estimate_rate(curve)


def test_insufficient_points():
    curve = est.build_survival_curve(_batch([0.1, 0.2, 0.3], 1.0), [0.5, 0.9])
    with pytest.raises(est.FitError):
        est.estimate_rate(curve)


def test_eps_for_abscissa_inverse():
    eps = np.array([0.9, 0.5, 0.2])
    s = eps ** (-2 / 3)
    np.testing.assert_allclose(est.eps_for_abscissa(s, 1.0), eps)


def test_small_ball_validation():
    spec = PathSpec(1e-3, 1.0)
    with pytest.raises(ConfigError):
        est.small_ball_fit(SYM, [0.5, 0.7], 10, spec)
    with pytest.raises(ConfigError):
        est.small_ball_fit(SYM, [0.7, 0.5], 10, PathSpec(1e-3, 2.0))


def test_small_ball_monotone_and_drop_warning():
    eps = [0.8, 0.6, 0.4, 0.005]
    with pytest.warns(RuntimeWarning, match="dropped"):
        fit = est.small_ball_fit(SYM, eps, 4000, PathSpec(1e-3, 1.0, seed=6))
    assert np.all(np.diff(fit.q_hat) <= 0)  # eps decreasing, q nonincreasing
    assert fit.dropped == [0.005]
    assert fit.k_prime > 0


def test_sup_norm_cap_does_not_change_small_events():
    spec = PathSpec(1e-3, 1.0, seed=8)
    full = est.sample_sup_norm(SYM, spec, 300)
    capped = est.sample_sup_norm(SYM, spec, 300, cap=0.5)
    np.testing.assert_array_equal(full < 0.5, capped < 0.5)
    np.testing.assert_array_equal(full[full < 0.5], capped[capped < 0.5])


def test_small_ball_identity_at_07():
    rep = est.small_ball_identity(SYM, 0.7, 30_000, PathSpec(1e-3, 1.0, seed=10), workers=2)
    assert rep["passed"], rep


def test_default_start_grid():
    grid = est.default_start_grid(Kernel(2.0, 0.25), Window(1, 2))
    k = 2 * max(1, 0.25 ** (-1 / 2)) * 3 ** 0.5
    assert len(grid) == 15
    assert all(abs(s.x) < k and -1 < s.y < 2 for s in grid)


def test_phi_single_point():
    phi = est.phi_sup_estimate(SYM, W11, [ORIGIN], 1.0, 500, PathSpec(1e-3, 1.0, seed=1))
    assert phi.argmax == ORIGIN and phi.sup == phi.p_hat[0]


def test_phi_rejects_start_outside():
    with pytest.raises(ConfigError):
        est.phi_sup_estimate(SYM, W11, [StartState(0, 2)], 1.0, 10, PathSpec(1e-3, 1.0))


def test_phi_ci_width_scales_with_root_n():
    spec = PathSpec(1e-3, 1.0, seed=4)
    a = est.phi_sup_estimate(SYM, W11, [ORIGIN], 1.0, 5000, spec)
    b = est.phi_sup_estimate(SYM, W11, [ORIGIN], 1.0, 10000, spec)
    ratio = (a.ci_high - a.ci_low)[0] / (b.ci_high - b.ci_low)[0]
    assert abs(ratio / math.sqrt(2) - 1) < 0.2


def test_phi_argmax_at_origin():
    phi = est.phi_sup_estimate(SYM, W11, GRID, 2.0, 20_000, PathSpec(1e-3, 2.0, seed=60))
    assert phi.argmax == ORIGIN


def test_submult_trivial_case():
    rep = est.submultiplicativity_check(SYM, Window(50, 50), [ORIGIN], 0.1, 0.1, 200,
                                        PathSpec(1e-3, 0.2, seed=1))
    assert rep.phi_s.sup == 1.0 and rep.passed


@pytest.mark.parametrize("kernel,window,grid", [
    (SYM, W11, GRID),
    (Kernel(2.0, 0.5), Window(1, 2), None),
])
def test_submultiplicativity(kernel, window, grid):
    grid = grid or est.default_start_grid(kernel, window)
    rep = est.submultiplicativity_check(kernel, window, grid, 1.0, 2.0, 5_000,
                                        PathSpec(1e-3, 3.0, seed=2))
    assert rep.passed


def test_anderson_domain_error():
    with pytest.raises(ConfigError):
        est.anderson_check(Kernel(2.0, 1.0), W11, [ORIGIN], 1.0, 10, PathSpec(1e-3, 1.0))
    with pytest.raises(ConfigError):
        est.anderson_check(SYM, Window(1, 2), [ORIGIN], 1.0, 10, PathSpec(1e-3, 1.0))


def test_anderson_origin_against_itself():
    rep = est.anderson_check(SYM, W11, [ORIGIN], 1.0, 1000, PathSpec(1e-3, 1.0, seed=3))
    assert rep.passed


def test_anderson_dominance():
    starts = [StartState(1, 0), StartState(-1, 0), StartState(0, 0.5), StartState(0, -0.5),
              StartState(5, 0)]
    rep = est.anderson_check(SYM, W11, starts, 2.0, 20_000, PathSpec(1e-3, 2.0, seed=70))
    assert rep.passed
    assert rep.p_hat[-1] < 0.01


def test_logconcavity_degenerate_triple():
    rep = est.logconcavity_probe(SYM, W11, [[[0.5, 0.1], [0.5, 0.1]]], 1.0, 2000,
                                 PathSpec(1e-3, 1.0, seed=1))
    assert rep.log_mid[0] == rep.log_chord[0]
    assert rep.passed


def test_logconcavity_gaussian_axis():
    triples = [[[-2, 0], [0, 0]], [[-1, 0], [1, 0]], [[0, 0], [2, 0]], [[-2, 0], [2, 0]]]
    rep = est.logconcavity_probe(SYM, W11, triples, 2.0, 20_000, PathSpec(1e-3, 2.0, seed=5))
    assert rep.passed and not rep.exploratory


def test_logconcavity_exploratory_beyond_gaussian():
    rep = est.logconcavity_probe(Kernel(2.0, 1.0), W11, [[[-1, 0], [1, 0]]], 1.0, 1000,
                                 PathSpec(1e-3, 1.0, seed=5))
    assert rep.exploratory and rep.passed is None


def test_survival_table_offsets_are_disjoint():
    spec = PathSpec(1e-3, 1.0, seed=2)
    t = est.survival_table(SYM, W11, [ORIGIN, ORIGIN], [1.0], 3000, spec)
    second = sample_exits(SYM, W11, ORIGIN, spec, 3000, offset=3000)
    assert t[1, 0] == survival_fraction(second, 1.0)[0]
