import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brownfunc.kernel_path import (
    ConfigError,
    Kernel,
    PathSpec,
    integrate_functional,
    kernel_eval,
    local_time_zero,
    n_steps_for,
    sample_endpoints,
    sample_path,
    simulate_brownian,
)
from brownfunc.stats import ks_two_sample
from conftest import philox_normals, reference_functional


@pytest.mark.parametrize("alpha,lam,x,expected", [
    (1.0, 2.0, 0.0, 0.0),
    (1.0, 2.0, -3.0, -6.0),
    (2.0, 1.0, 1.5, 2.25),
    (0.5, 3.0, -4.0, -6.0),
])
def test_kernel_eval_values(alpha, lam, x, expected):
    assert kernel_eval(Kernel(alpha, lam), x) == expected


def test_kernel_eval_vectorized():
    out = Kernel(2.0, 0.5)(np.array([-2.0, 0.0, 3.0]))
    np.testing.assert_array_equal(out, [-2.0, 0.0, 9.0])


@given(st.floats(0.1, 4.0), st.floats(-50, 50))
def test_kernel_is_odd_when_lam_is_one(alpha, x):
    k = Kernel(alpha, 1.0)
    assert kernel_eval(k, -x) == -kernel_eval(k, x)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.7, 2.0, 3.5])
def test_m_const_bound(alpha, rng):
    k = Kernel(alpha, 1.0)
    u, v = rng.normal(scale=10, size=(2, 100_000))
    lhs = np.abs(u + v) ** alpha
    rhs = k.m_const * (np.abs(u) ** alpha + np.abs(v) ** alpha)
    assert np.all(lhs <= rhs * (1 + 1e-12))


def test_self_similarity_constants():
    k = Kernel(2.0, 1.0)
    assert k.self_similarity_index == 2.0
    assert k.time_exponent == 0.5


@pytest.mark.parametrize("alpha,lam", [(0, 1), (-1, 1), (1, 0), (1, -2), (math.nan, 1), (1, math.inf)])
def test_kernel_rejects_bad_parameters(alpha, lam):
    with pytest.raises(ConfigError):
        Kernel(alpha, lam)


def test_pathspec_validation():
    with pytest.raises(ConfigError):
        PathSpec(dt=2.0, horizon=1.0)
    with pytest.raises(ConfigError):
        PathSpec(dt=0.0, horizon=1.0)
    with pytest.raises(ConfigError):
        PathSpec(dt=1e-3, horizon=1.0, seed=-1)
    with pytest.raises(ConfigError):
        PathSpec(dt=1e-300, horizon=1e10)


def test_step_count_is_tolerant_of_rounding():
    assert n_steps_for(1.0, 1e-4) == 10_000
    assert n_steps_for(50.0, 1e-3) == 50_000
    assert n_steps_for(1.0, 0.3) == 4


def test_simulate_brownian_length_and_start():
    b = simulate_brownian(PathSpec(dt=1.0, horizon=1.0), x0=5.0)
    assert b.size == 2 and b[0] == 5.0


def test_brownian_matches_reference_stream():
    spec = PathSpec(1e-3, 1.0, seed=42, replicate_id=7)
    b = simulate_brownian(spec)
    z = philox_normals(42, 7, spec.n_steps)
    ref = np.concatenate([[0.0], np.cumsum(math.sqrt(1e-3) * z)])
    np.testing.assert_allclose(b, ref, rtol=0, atol=1e-12)


def test_brownian_increment_moments():
    dt = 1e-2
    b = simulate_brownian(PathSpec(dt, 10_000.0, seed=3))
    inc = np.diff(b)
    assert inc.size == 1_000_000
    assert abs(inc.mean()) < 4 * math.sqrt(dt / inc.size)
    assert abs(inc.var() / dt - 1) < 0.01


def test_determinism_bit_identical():
    spec = PathSpec(1e-3, 2.0, seed=9, replicate_id=4)
    a = sample_path(Kernel(1.5, 0.7), spec)
    b = sample_path(Kernel(1.5, 0.7), spec)
    assert a.b_values.tobytes() == b.b_values.tobytes()
    assert a.x_values.tobytes() == b.x_values.tobytes()


def test_distinct_replicates_differ():
    a = simulate_brownian(PathSpec(1e-2, 1.0, seed=1, replicate_id=0))
    b = simulate_brownian(PathSpec(1e-2, 1.0, seed=1, replicate_id=1))
    assert not np.array_equal(a, b)


def test_integrate_zero_path():
    x = integrate_functional(np.zeros(100), Kernel(1.3, 2.0), 0.0, 0.01)
    assert np.all(x == 0)


def test_integrate_linear_path():
    dt = 1e-3
    b = np.linspace(0.0, 1.0, 1001)
    x = integrate_functional(b, Kernel(1.0, 1.0), 0.0, dt)
    assert abs(x[-1] - 0.5) <= 1e-6


def test_integrate_matches_python_oracle(rng):
    b = np.cumsum(rng.normal(size=500)) * 0.1
    for alpha, lam in [(1.0, 1.0), (2.0, 0.5), (0.7, 3.0)]:
        x = integrate_functional(b, Kernel(alpha, lam), 0.25, 0.01)
        np.testing.assert_allclose(x, reference_functional(b, alpha, lam, 0.01, 0.25), rtol=1e-13,
                                   atol=1e-15)


def test_sample_path_invariants():
    k = Kernel(2.0, 0.5)
    spec = PathSpec(1e-3, 1.0, seed=5)
    p = sample_path(k, spec, x0=0.3, y0=-0.2)
    assert len(p.times) == len(p.b_values) == len(p.x_values) == spec.n_steps + 1
    assert p.b_values[0] == 0.3 and p.x_values[0] == -0.2
    v = kernel_eval(k, p.b_values)
    # trapezoid recurrence, exactly as the kernel evaluates it
    expected = p.x_values[:-1] + (0.5 * spec.dt) * (v[:-1] + v[1:])
    np.testing.assert_array_equal(p.x_values[1:], expected)


def test_streamed_endpoints_match_materialized_paths():
    k = Kernel(1.0, 2.0)
    spec = PathSpec(1e-3, 0.5, seed=11)
    b_end, x_end = sample_endpoints(k, spec, 5, offset=3)
    for i in range(5):
        p = sample_path(k, spec.with_replicate(3 + i))
        assert b_end[i] == p.b_values[-1]
        assert x_end[i] == p.x_values[-1]


def test_endpoints_independent_of_workers():
    k = Kernel(1.0, 1.0)
    spec = PathSpec(1e-2, 1.0, seed=2)
    a = sample_endpoints(k, spec, 37, workers=1)
    b = sample_endpoints(k, spec, 37, workers=4)
    for u, v in zip(a, b):
        assert u.tobytes() == v.tobytes()


def test_self_similarity_ks():
    k = Kernel(1.0, 1.0)
    n = 10_000
    _, x1 = sample_endpoints(k, PathSpec(1e-3, 1.0, seed=77), n)
    for i, c in enumerate((2.0, 4.0)):
        _, xc = sample_endpoints(k, PathSpec(1e-3, c, seed=77), n, offset=(i + 1) * n)
        _, p = ks_two_sample(xc * c ** (-k.self_similarity_index), x1)
        assert p > 0.01


def test_local_time_above_band_is_zero():
    assert np.all(local_time_zero(np.full(50, 3.0), 1e-2) == 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32))
def test_local_time_nondecreasing(seed):
    b = simulate_brownian(PathSpec(1e-3, 1.0, seed=seed))
    lt = local_time_zero(b, 1e-3)
    assert np.all(np.diff(lt) >= 0)


def test_local_time_mean():
    # E L(0, 1) = E|B_1| = sqrt(2/pi)
    dt = 1e-5
    n = 10_000
    vals = np.empty(n)
    for i in range(n):
        b = simulate_brownian(PathSpec(dt, 1.0, seed=5, replicate_id=i))
        vals[i] = local_time_zero(b, dt)[-1]
    assert abs(vals.mean() / math.sqrt(2 / math.pi) - 1) < 0.10


def test_local_time_rejects_bad_band():
    with pytest.raises(ValueError):
        local_time_zero(np.zeros(3), 0.1, band=0.0)
