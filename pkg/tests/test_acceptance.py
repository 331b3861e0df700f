"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from newma.calibration import (
    choose_forgetting_factors,
    detection_bounds,
    solve_lambda,
    window_size,
)
from newma.datagen import GmmStreamSpec, generate_gmm_stream
from newma.detectors import Newma, ScanB
from newma.evaluation import dominates, score, sweep_thresholds, time_steps
from newma.feature_map import (
    FeatureMapSpec,
    build_feature_map,
    median_trick_bandwidth,
)
from newma.pipeline import RunConfig, run_config
from newma.theory import (
    ArlConfig,
    arl_markov,
    arl_monte_carlo,
    gaussian_cdf,
    gaussian_kernel_mmd2,
    null_law_toy_experiment,
)
from newma.thresholding import FixedThreshold

from .oracles import decomposition_weights


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line for a criterion and fail the test if needed."""

    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return emit


def test_criterion_01_decomposition_identity(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for trial in range(100):
        d = (1, 5)[trial % 2]
        use_rff = trial % 4 >= 2
        big = rng.uniform(0.05, 0.5)
        small = big * rng.uniform(0.2, 0.8)
        B = window_size(big, small)
        if use_rff:
            fmap = build_feature_map(FeatureMapSpec("rff", d, m=8, sigma=1.0, seed=trial))
        else:
            fmap = build_feature_map(FeatureMapSpec("identity", d))
        z0 = rng.standard_normal(fmap.output_dim)
        X = rng.standard_normal((3 * B, d))
        det = Newma(big, small, fmap, FixedThreshold(math.inf), z0=z0)
        psi = fmap.embed_batch(X)
        for t in range(1, 3 * B + 1):
            det.step(X[t - 1])
            if t <= B:
                continue
            C, recent, past = decomposition_weights(big, small, t)
            brute = C * (recent @ psi[t - B : t] - past[0] * z0 - past[1:] @ psi[: t - B])
            worst = max(worst, float(np.abs((det.z - det.z_prime) - brute).max()))
    elapsed = time.perf_counter() - start
    verdict(1, "decomposition identity", worst < 1e-10 and elapsed < 5, f"max deviation {worst:.2e}, {elapsed:.1f}s")


def test_criterion_02_calibration_round_trip(verdict):
    start = time.perf_counter()
    details, ok = [], True
    for B in (10, 50, 150, 250):
        big, small = choose_forgetting_factors(B)
        residual = abs(small * (1 - small) ** B - big * (1 - big) ** B)
        back = window_size(big, small)
        ok &= residual < 1e-12 and back in (B, B + 1)
        details.append(f"B={B}: residual {residual:.1e}, window {back}")
    elapsed = time.perf_counter() - start
    verdict(2, "calibration round-trip", ok and elapsed < 10, "; ".join(details) + f"; {elapsed:.1f}s")


def test_criterion_03_arl_markov_vs_monte_carlo(verdict):
    start = time.perf_counter()
    taus = np.round(np.arange(0.10, 0.4001, 0.05), 10)
    markov, rows, ok = [], [], True
    for i, tau in enumerate(taus):
        T = arl_markov(ArlConfig(gaussian_cdf, 0.2, 0.1, float(tau), 2e-2))
        mc = arl_monte_carlo(0.2, 0.1, float(tau), lambda rng, n: rng.standard_normal(n), runs=1000, seed=300 + i)
        tol = max(0.10 * mc.mean, 2 * mc.stderr)
        ok &= abs(T - mc.mean) <= tol
        markov.append(T)
        rows.append(f"tau={tau:.2f} markov={T:.2f} mc={mc.mean:.2f}+-{mc.stderr:.2f} ({(T / mc.mean - 1):+.1%})")
    monotone = bool(np.all(np.diff(markov) >= 0))
    elapsed = time.perf_counter() - start
    verdict(
        3,
        "ARL Markov chain vs Monte Carlo",
        ok and monotone and elapsed < 300,
        "; ".join(rows) + f"; monotone={monotone}; {elapsed:.0f}s",
    )


def test_criterion_04_null_law(verdict):
    start = time.perf_counter()
    exp = null_law_toy_experiment(big_lambda=0.02, small_lambda=0.01, n_eigen=30, n_sims=1000)
    rel = abs(exp.scaled_statistic.mean() / exp.expected_mean - 1)
    elapsed = time.perf_counter() - start
    verdict(
        4,
        "limiting null law",
        exp.ks_distance < 0.08 and rel <= 0.10 and elapsed < 120,
        f"KS {exp.ks_distance:.3f}, mean off by {rel:.1%}, t={exp.t}, {elapsed:.1f}s",
    )


def test_criterion_05_kernel_approximation(verdict):
    start = time.perf_counter()
    m, d = 4096, 20
    rng = np.random.default_rng(505)
    X = rng.standard_normal((100, d))
    Y = rng.standard_normal((100, d))
    sigma = median_trick_bandwidth(np.vstack([X, Y]))
    exact = np.exp(-((X - Y) ** 2).sum(axis=1) / (2 * sigma**2))
    bound = 4 / math.sqrt(m)
    failures, rff_err, ff_err = 0, [], []
    for seed in range(20):
        rff = build_feature_map(FeatureMapSpec("rff", d, m=m, sigma=sigma, seed=seed))
        est = (rff.embed_batch(X) * rff.embed_batch(Y)).sum(axis=1)
        err = np.abs(est - exact)
        failures += err.max() > bound
        rff_err.append(err.mean())
        ff = build_feature_map(FeatureMapSpec("fastfood", d, m=m, sigma=sigma, seed=seed))
        ff_err.append(np.abs((ff.embed_batch(X) * ff.embed_batch(Y)).sum(axis=1) - exact).mean())
    rate = failures / 20
    ratio = np.mean(ff_err) / np.mean(rff_err)
    elapsed = time.perf_counter() - start
    verdict(
        5,
        "kernel approximation",
        rate <= 0.05 and ratio <= 2 and elapsed < 30,
        f"seeds over 4/sqrt(m): {rate:.0%}, RFF mean error {np.mean(rff_err):.4f}, Fastfood/RFF {ratio:.2f}, {elapsed:.1f}s",
    )


def test_criterion_06_random_feature_mmd_bound(verdict):
    start = time.perf_counter()
    d, n, m, sigma, rho = 5, 10_000, 1000, 2.0, 0.05
    mu1, cov1 = np.zeros(d), np.eye(d)
    mu2, cov2 = np.full(d, 0.5), 1.5 * np.eye(d)
    mmd2 = gaussian_kernel_mmd2(mu1, cov1, mu2, cov2, sigma)
    epsm = 2 * math.sqrt(2) * math.sqrt(math.log(1 / rho)) / math.sqrt(m)
    hits = 0
    worst = 0.0
    for seed in range(40):
        rng = np.random.default_rng(600 + seed)
        fmap = build_feature_map(FeatureMapSpec("rff", d, m=m, sigma=sigma, seed=seed))
        PX = fmap.embed_batch(mu1 + rng.standard_normal((n, d)) @ np.linalg.cholesky(cov1).T)
        PY = fmap.embed_batch(mu2 + rng.standard_normal((n, d)) @ np.linalg.cholesky(cov2).T)
        delta = PX.mean(axis=0) - PY.mean(axis=0)
        estimate = float(delta @ delta)
        # delta-method stderr of ||mean PX - mean PY||^2
        gx, gy = (PX - PX.mean(0)) @ delta, (PY - PY.mean(0)) @ delta
        stderr = 2 * math.sqrt((gx.var() + gy.var()) / n)
        gap = abs(estimate - mmd2)
        worst = max(worst, gap)
        hits += gap <= epsm + 2 * stderr
    frac = hits / 40
    elapsed = time.perf_counter() - start
    verdict(
        6,
        "random-feature MMD bound",
        frac >= 0.95 and elapsed < 120,
        f"MMD^2 {mmd2:.4f}, within bound in {frac:.0%} of seeds, worst gap {worst:.4f}, eps_m {epsm:.4f}, {elapsed:.1f}s",
    )


@pytest.fixture(scope="module")
def gmm_runs():
    start = time.perf_counter()
    spec = GmmStreamSpec(d=20, k=5, n=1000, n_changes=50, seed=7)
    X, cps = generate_gmm_stream(spec)
    threshold = "adaptive:0.01,1.64"
    newma_cfg, newma_trace = run_config(RunConfig("newma", 20, window=150, threshold=threshold, seed=7), X)
    # same feature map (spec, seed, bandwidth) and window for the sliding window
    sw_cfg = RunConfig("sw", 20, window=150, m=newma_cfg.m, sigma=newma_cfg.sigma, threshold=threshold, seed=7)
    _, sw_trace = run_config(sw_cfg, X)
    return {
        "cps": cps,
        "n": spec.n,
        "newma": newma_trace,
        "sw": sw_trace,
        "config": newma_cfg,
        "seconds": time.perf_counter() - start,
    }


def test_criterion_07_gmm_detection(verdict, gmm_runs):
    cps, n = gmm_runs["cps"], gmm_runs["n"]
    rn = score(gmm_runs["newma"].flags, cps, n)
    rs = score(gmm_runs["sw"].flags, cps, n)
    B = 150
    ok = rn.missed_rate <= 0.20 and rn.edd is not None and rn.edd <= B and rs.missed_rate >= rn.missed_rate - 0.05
    verdict(
        7,
        "GMM detection",
        ok and gmm_runs["seconds"] < 300,
        f"NEWMA missed {rn.missed_rate:.0%} EDD {rn.edd} FA {rn.false_alarms}; "
        f"SW missed {rs.missed_rate:.0%} EDD {rs.edd} FA {rs.false_alarms}; m={gmm_runs['config'].m}, {gmm_runs['seconds']:.1f}s",
    )


def test_criterion_08_adaptive_not_dominated(verdict, gmm_runs):
    cps, n = gmm_runs["cps"], gmm_runs["n"]
    trace = gmm_runs["newma"]
    adaptive = score(trace.flags, cps, n)
    stats = trace.stat[trace.armed]
    taus = np.unique(np.quantile(stats, np.linspace(0, 1, 200)))
    sweep = sweep_thresholds(trace.stat, cps, n, taus, trace.armed)
    beaten = [tau for tau, r in sweep if dominates(r, adaptive)]
    verdict(
        8,
        "adaptive point on the fixed-threshold envelope",
        not beaten,
        f"adaptive FA {adaptive.false_alarms}, missed {adaptive.missed}, EDD {adaptive.edd}; "
        f"{len(sweep)} fixed thresholds, {len(beaten)} dominate it",
    )


def test_criterion_09_complexity(verdict):
    start = time.perf_counter()
    d, m, n = 50, 1000, 12_000
    X = np.random.default_rng(909).standard_normal((n, d))
    fmap = build_feature_map(FeatureMapSpec("rff", d, m=m, sigma=math.sqrt(2 * d), seed=9))

    def newma_for(B):
        big, small = choose_forgetting_factors(B)
        return lambda: Newma(big, small, fmap)

    def median_of_runs(factory, warmup):
        return float(np.median([time_steps(factory, X, warmup) for _ in range(3)]))

    t_newma = {B: median_of_runs(newma_for(B), 0) for B in (50, 500)}
    t_scanb = {B: median_of_runs(lambda B=B: ScanB(B, math.sqrt(2 * d), d, n_blocks=3), 4 * B) for B in (100, 400)}
    r_newma = t_newma[500] / t_newma[50]
    r_scanb = t_scanb[400] / t_scanb[100]
    big50, small50 = choose_forgetting_factors(50)
    big500, small500 = choose_forgetting_factors(500)
    same_memory = Newma(big50, small50, fmap).state_nbytes == Newma(big500, small500, fmap).state_nbytes
    elapsed = time.perf_counter() - start
    verdict(
        9,
        "per-step complexity",
        0.8 <= r_newma <= 1.25 and r_scanb >= 3 and same_memory and elapsed < 180,
        f"NEWMA B=500/B=50 {r_newma:.2f} ({t_newma[50] * 1e6:.0f}us/step); "
        f"Scan-B B=400/B=100 {r_scanb:.2f} ({t_scanb[100] * 1e6:.0f}us/step); "
        f"NEWMA state bytes independent of B: {same_memory}; {elapsed:.0f}s",
    )


def test_criterion_10_null_exceedance(verdict):
    start = time.perf_counter()
    B, big, rho, trials, d = 50, 0.1, 0.05, 1000, 5
    small = solve_lambda(big, B)
    t = 2 * B
    fmap = build_feature_map(FeatureMapSpec("rff", d, m=100, sigma=math.sqrt(2 * d), seed=10))
    bounds = detection_bounds(big, small, t, rho, M=1.0)
    rng = np.random.default_rng(1010)
    z = np.zeros((trials, fmap.output_dim))
    zp = np.zeros_like(z)
    for _ in range(t):
        psi = fmap.embed_batch(rng.standard_normal((trials, d)))
        z = (1 - big) * z + big * psi
        zp = (1 - small) * zp + small * psi
    S = np.linalg.norm(z - zp, axis=1)
    frac = float(np.mean(S > bounds.null_bound))
    elapsed = time.perf_counter() - start
    verdict(
        10,
        "null exceedance of eps1 + eps2",
        frac <= rho and elapsed < 60,
        f"exceedance {frac:.3f} with bound {bounds.null_bound:.3f} (max S_t {S.max():.3f}), {elapsed:.1f}s",
    )
