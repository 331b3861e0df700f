import math
from dataclasses import replace

import numpy as np
import pytest

from newma.errors import ConfigurationError, ResourceLimitError
from newma.theory import (
    ArlConfig,
    NullLawConfig,
    arl_markov,
    arl_markov_extrapolated,
    arl_monte_carlo,
    build_arl_chain,
    gaussian_cdf,
    gaussian_kernel_mmd2,
    minimal_null_time,
    null_law_scale,
    null_law_toy_experiment,
    simulate_null_law,
    solve_expected_run_length,
)


def normal(rng, n):
    return rng.standard_normal(n)


def config(tau, eps=0.02, **kw):
    return ArlConfig(gaussian_cdf, 0.2, 0.1, tau, eps, **kw)


# Markov chain


def test_grid_layout():
    c = config(0.1)
    assert c.grid_size == 5000
    assert c.grid_value(0) == pytest.approx(-50.0)
    assert c.grid_value(2500) == pytest.approx(0.0)


def test_transition_rows_are_substochastic():
    for tau in (0.05, 0.2, 0.4):
        chain = build_arl_chain(config(tau))
        rows = np.asarray(chain.P.sum(axis=1)).ravel()
        assert rows.min() >= 0.0 and rows.max() <= 1 + 1e-9
        assert (np.abs(chain.states[:, 0] - chain.states[:, 1]) <= round(tau / 0.02)).all()
        assert tuple(chain.states[chain.start]) == (2500, 2500)


def test_linear_solve_residual():
    chain = build_arl_chain(config(0.3))
    x = solve_expected_run_length(chain.P)
    residual = x - chain.P @ x - 1
    assert np.linalg.norm(residual) / math.sqrt(chain.n_states) < 1e-10


def test_tiny_threshold_run_length_tends_to_one():
    coarse = arl_markov(config(1e-6, eps=0.02))
    fine = arl_markov(config(1e-6, eps=0.005))
    assert 1.0 <= fine < coarse < 1.1
    assert fine == pytest.approx(1.0, abs=0.03)


def test_markov_run_length_increases_with_threshold():
    taus = np.arange(0.05, 0.45, 0.05)
    values = [arl_markov(config(float(t))) for t in taus]
    assert all(np.diff(values) > 0)


def test_state_cap_raises():
    with pytest.raises(ResourceLimitError):
        build_arl_chain(config(0.4, max_states=1000))
    chain = build_arl_chain(config(0.1))
    assert build_arl_chain(config(0.1, max_states=chain.n_states)).n_states == chain.n_states
    with pytest.raises(ResourceLimitError):
        build_arl_chain(config(0.1, max_states=chain.n_states - 1))


@pytest.mark.parametrize(
    "kwargs", [dict(tau=0.0), dict(eps=0.0), dict(z0=100.0), dict(big_lambda=0.05), dict(small_lambda=0.0)]
)
def test_arl_config_validation(kwargs):
    args = dict(cdf=gaussian_cdf, big_lambda=0.2, small_lambda=0.1, tau=0.1, eps=0.02)
    args.update(kwargs)
    with pytest.raises(ConfigurationError):
        ArlConfig(**args)


@pytest.mark.xfail(
    strict=True,
    reason="the grid chain's error is first order in eps: 6% between eps=0.02 and 0.01 at tau=0.1",
)
@pytest.mark.parametrize("tau", [0.1, 0.2])
def test_grid_refinement_stability(tau):
    coarse = arl_markov(config(tau, eps=0.02))
    fine = arl_markov(config(tau, eps=0.01))
    assert abs(coarse - fine) / fine < 0.05


@pytest.mark.slow
@pytest.mark.parametrize("tau", [0.1, 0.25, 0.35])
def test_extrapolated_markov_matches_monte_carlo(tau):
    mc = arl_monte_carlo(0.2, 0.1, tau, normal, runs=4000, seed=17)
    ext = arl_markov_extrapolated(config(tau))
    assert abs(ext - mc.mean) <= 2 * mc.stderr + 0.05 * mc.mean


# Monte Carlo


def test_monte_carlo_zero_threshold():
    est = arl_monte_carlo(0.2, 0.1, 0.0, normal, runs=100)
    assert est.mean == 1.0 and est.censored == 0


def test_monte_carlo_stderr_scales_with_runs():
    small = arl_monte_carlo(0.2, 0.1, 0.2, normal, runs=2000, seed=1)
    large = arl_monte_carlo(0.2, 0.1, 0.2, normal, runs=8000, seed=2)
    assert small.stderr / large.stderr == pytest.approx(2.0, rel=0.15)


def test_monte_carlo_censoring_is_reported():
    est = arl_monte_carlo(0.2, 0.1, 50.0, normal, runs=100, horizon=20)
    assert est.censored == 100 and est.inconclusive and math.isnan(est.mean)
    with pytest.raises(ConfigurationError):
        arl_monte_carlo(0.2, 0.1, 0.1, normal, runs=99)


def test_monte_carlo_is_seeded():
    a = arl_monte_carlo(0.2, 0.1, 0.2, normal, runs=200, seed=5)
    b = arl_monte_carlo(0.2, 0.1, 0.2, normal, runs=200, seed=5)
    assert np.array_equal(a.run_lengths, b.run_lengths)


# Null law


def test_null_law_scale():
    assert null_law_scale(2.0) == pytest.approx(1 / 6)
    with pytest.raises(ConfigurationError):
        null_law_scale(1.0)


def test_null_law_zero_eigenvalues():
    assert (simulate_null_law(NullLawConfig(np.zeros(4), 2.0), 50) == 0).all()


def test_null_law_mean_and_variance():
    cfg = NullLawConfig(np.array([0.5, 0.3, 0.15, 0.05]), 2.0)
    y = simulate_null_law(cfg, 10_000, seed=1)
    assert abs(y.mean() - cfg.mean) <= 3 * y.std(ddof=1) / 100
    y = simulate_null_law(cfg, 100_000, seed=2)
    centered = (y - y.mean()) ** 2
    var_stderr = centered.std(ddof=1) / math.sqrt(y.size)
    assert abs(y.var(ddof=1) - cfg.variance) <= 5 * var_stderr


def test_null_law_config_validation():
    with pytest.raises(ConfigurationError):
        NullLawConfig(np.array([-1.0]), 2.0)
    with pytest.raises(ConfigurationError):
        NullLawConfig(np.array([]), 2.0)


def test_minimal_null_time():
    assert minimal_null_time(0.01) == math.ceil(200 * math.log(100))


def test_toy_experiment_matches_limit_law():
    exp = null_law_toy_experiment(seed=0)
    assert exp.t == minimal_null_time(0.01)
    assert exp.eigenvalues.sum() == pytest.approx(1.0)
    assert exp.scaled_statistic.mean() == pytest.approx(exp.expected_mean, rel=0.10)
    assert exp.ks_distance < 0.1


@pytest.mark.slow
def test_toy_experiment_improves_as_lambda_shrinks():
    base = [null_law_toy_experiment(0.02, 0.01, seed=s).ks_distance for s in range(5)]
    half = [null_law_toy_experiment(0.01, 0.005, seed=s).ks_distance for s in range(5)]
    # five-seed means; the KS noise floor at n=1000 is about 0.02 per seed
    assert np.mean(half) <= np.mean(base) + 0.02


# Closed-form MMD


def test_gaussian_mmd_zero_for_equal_laws():
    S = np.array([[1.0, 0.3], [0.3, 2.0]])
    assert gaussian_kernel_mmd2(np.zeros(2), S, np.zeros(2), S, 1.5) == pytest.approx(0.0, abs=1e-15)


def test_gaussian_mmd_matches_monte_carlo():
    rng = np.random.default_rng(0)
    m1, m2 = np.zeros(2), np.array([1.0, -0.5])
    S1, S2 = np.eye(2), np.diag([0.5, 2.0])
    sigma = 1.2
    n = 200_000
    X1 = rng.multivariate_normal(m1, S1, size=(n, 2))
    X2 = rng.multivariate_normal(m2, S2, size=(n, 2))

    def k(a, b):
        return np.exp(-((a - b) ** 2).sum(axis=1) / (2 * sigma**2))

    h = k(X1[:, 0], X1[:, 1]) + k(X2[:, 0], X2[:, 1]) - k(X1[:, 0], X2[:, 1]) - k(X1[:, 1], X2[:, 0])
    assert gaussian_kernel_mmd2(m1, S1, m2, S2, sigma) == pytest.approx(h.mean(), abs=4 * h.std() / math.sqrt(n))
