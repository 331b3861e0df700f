"""Numerical companions to the analysis of NEWMA.

* :func:`arl_markov` discretizes the pair ``(z_t, z'_t)`` of a
  one-dimensional NEWMA onto an ``eps``-grid and reads the average run length
  off the absorbing Markov chain, ``ARL ~= e_1^T (I - P)^{-1} 1``.
* :func:`arl_monte_carlo` is the independent simulation estimate.
* :func:`simulate_null_law` draws from the limiting law of
  ``||z_t - z'_t||^2 / small_lambda`` under the null, a weighted sum of
  chi-square variables, and :func:`null_law_toy_experiment` compares it with
  simulated NEWMA runs on a cosine eigenbasis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import ndtr
from scipy.stats import ks_2samp

from .errors import ConfigurationError, NumericalError, ResourceLimitError

MAX_STATES = 4_000_000
# probability mass of Psi(X) ignored in each tail when enumerating transitions
TAIL_MASS = 1e-15


def gaussian_cdf(x):
    return ndtr(x)


def _quantile(cdf: Callable, p: float) -> float:
    lo, hi = -1.0, 1.0
    while cdf(lo) > p:
        lo *= 2
        if lo < -1e12:
            raise ConfigurationError("cdf does not reach its lower tail")
    while cdf(hi) < p:
        hi *= 2
        if hi > 1e12:
            raise ConfigurationError("cdf does not reach its upper tail")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ArlConfig:
    """Inputs of :func:`arl_markov`.

    ``cdf`` is the distribution function of the scalar ``Psi(X)`` under the
    null; it must accept numpy arrays.
    """

    cdf: Callable[[np.ndarray], np.ndarray]
    big_lambda: float
    small_lambda: float
    tau: float
    eps: float
    z0: float = 0.0
    max_states: int = MAX_STATES
    tail_mass: float = TAIL_MASS

    def __post_init__(self) -> None:
        if not (0.0 < self.small_lambda < self.big_lambda < 1.0):
            raise ConfigurationError("need 0 < small_lambda < big_lambda < 1")
        if not self.tau > 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if abs(self.z0) > 1.0 / self.eps:
            raise ConfigurationError("initial state lies outside the grid [-1/eps, 1/eps]")

    @property
    def grid_size(self) -> int:
        return math.ceil(2.0 / self.eps**2)

    def grid_value(self, idx):
        return np.asarray(idx) * self.eps - 1.0 / self.eps


@dataclass
class ArlChain:
    """The continuation states and transition matrix of the discretized chain."""

    config: ArlConfig
    states: np.ndarray  # (K, 2) grid indices of (z, z')
    P: sp.csr_matrix
    start: int

    @property
    def n_states(self) -> int:
        return self.states.shape[0]


def build_arl_chain(config: ArlConfig) -> ArlChain:
    """Enumerate continuation states and transition probabilities.

    Grid point ``k`` has value ``k eps - 1/eps`` (``k = 0 .. M-1``). A state
    is a pair of grid points at most ``tau`` apart. The transition
    probability from ``(i1, j1)`` to ``(i2, j2)`` is the ``Psi``-mass of the
    values that send ``z`` into the cell of ``i2`` and ``z'`` into the cell
    of ``j2``. Only pairs reachable from ``(z0, z0)`` are materialized: both
    averages are convex combinations of ``z0`` and past ``Psi`` values, so
    they stay within the central ``1 - 2 tail_mass`` range of ``Psi``.
    Transitions leaving that range are dropped (counted as absorbed).
    """
    c = config
    F = c.cdf
    eps, L, l = c.eps, c.big_lambda, c.small_lambda
    M = c.grid_size
    inv = 1.0 / eps
    q_lo = _quantile(F, c.tail_mass)
    q_hi = _quantile(F, 1.0 - c.tail_mass)
    v_lo, v_hi = min(q_lo, c.z0), max(q_hi, c.z0)

    def to_idx(v):
        return (np.asarray(v) + inv) / eps

    k_lo = max(0, int(math.floor(to_idx(v_lo))) - 1)
    k_hi = min(M - 1, int(math.ceil(to_idx(v_hi))) + 1)
    width = int(math.floor(c.tau / eps + 1e-9))

    n_cells = k_hi - k_lo + 1
    w = min(width, n_cells - 1)
    n_pairs = n_cells * (2 * w + 1) - w * (w + 1)
    if n_pairs > c.max_states:
        raise ResourceLimitError(f"{n_pairs} states exceed the cap of {c.max_states}; increase eps or lower tau")

    # enumerate states (i, j) with k_lo <= i, j <= k_hi and |i - j| <= width
    ii = np.arange(k_lo, k_hi + 1)
    offs = np.arange(-width, width + 1)
    I = np.repeat(ii, offs.size)
    J = I + np.tile(offs, ii.size)
    keep = (J >= k_lo) & (J <= k_hi)
    I, J = I[keep], J[keep]
    K = I.size
    n_j = k_hi - k_lo + 1
    lookup = np.full((n_j, n_j), -1, dtype=np.int64)
    lookup[I - k_lo, J - k_lo] = np.arange(K)

    k0 = int(round(to_idx(c.z0)))
    start = int(lookup[k0 - k_lo, k0 - k_lo])

    rows, cols, vals = [], [], []
    half = eps / 2
    chunk = max(1, 400_000 // max(1, int(L * (q_hi - q_lo) / eps) + 3))
    for s0 in range(0, K, chunk):
        i1 = I[s0 : s0 + chunk]
        j1 = J[s0 : s0 + chunk]
        z1 = c.grid_value(i1)
        zp1 = c.grid_value(j1)
        # candidate cells for z: those meeting (1-L) z1 + L [q_lo, q_hi]
        lo2 = np.floor(to_idx((1 - L) * z1 + L * q_lo) - 0.5).astype(np.int64)
        hi2 = np.ceil(to_idx((1 - L) * z1 + L * q_hi) + 0.5).astype(np.int64)
        span = int((hi2 - lo2).max()) + 1
        i2 = lo2[:, None] + np.arange(span)[None, :]
        src = np.broadcast_to(np.arange(s0, s0 + i1.size)[:, None], i2.shape)
        ok = i2 <= hi2[:, None]
        i2, src = i2[ok], src[ok]
        z1s, zp1s = z1[src - s0], zp1[src - s0]
        a2 = c.grid_value(i2)
        psi_lo = (a2 - (1 - L) * z1s - half) / L
        psi_hi = (a2 - (1 - L) * z1s + half) / L
        # z' cells met while Psi ranges over the z-cell preimage
        jlo = np.floor(to_idx((1 - l) * zp1s + l * psi_lo) - 0.5).astype(np.int64)
        jhi = np.ceil(to_idx((1 - l) * zp1s + l * psi_hi) + 0.5).astype(np.int64)
        jspan = int((jhi - jlo).max()) + 1
        j2 = jlo[:, None] + np.arange(jspan)[None, :]
        okj = j2 <= jhi[:, None]
        rep = np.broadcast_to(np.arange(i2.size)[:, None], j2.shape)[okj]
        j2 = j2[okj]
        i2r, srcr = i2[rep], src[rep]
        cont = (np.abs(i2r - j2) <= width) & (i2r >= k_lo) & (i2r <= k_hi) & (j2 >= k_lo) & (j2 <= k_hi)
        rep, j2, i2r, srcr = rep[cont], j2[cont], i2r[cont], srcr[cont]
        b2 = c.grid_value(j2)
        zp1r = zp1s[rep]
        u1 = np.maximum(psi_lo[rep], (b2 - (1 - l) * zp1r - half) / l)
        u2 = np.minimum(psi_hi[rep], (b2 - (1 - l) * zp1r + half) / l)
        pos = u1 < u2
        p = np.zeros(u1.shape)
        p[pos] = F(u2[pos]) - F(u1[pos])
        nz = p > 0
        dst = lookup[i2r[nz] - k_lo, j2[nz] - k_lo]
        rows.append(srcr[nz])
        cols.append(dst)
        vals.append(p[nz])
    P = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(K, K)
    )
    return ArlChain(config=c, states=np.stack([I, J], axis=1), P=P, start=start)


def solve_expected_run_length(P: sp.spmatrix, rtol: float = 1e-10) -> np.ndarray:
    """Solve ``(I - P) x = 1`` for every starting state.

    A sparse direct factorization is tried first; if its residual misses
    ``rtol`` the solution is refined with GMRES.
    """
    K = P.shape[0]
    A = (sp.identity(K, format="csc") - P.tocsc()).tocsc()
    ones = np.ones(K)
    try:
        x = spla.spsolve(A, ones)
    except (RuntimeError, MemoryError) as exc:  # pragma: no cover - factorization failure
        raise NumericalError(f"sparse solve failed: {exc}") from exc
    res = np.linalg.norm(A @ x - ones) / np.linalg.norm(ones)
    if not np.isfinite(res) or res >= rtol:
        x, info = spla.gmres(A, ones, x0=np.nan_to_num(x), rtol=rtol * 0.1, atol=0.0, restart=200, maxiter=2000)
        res = np.linalg.norm(A @ x - ones) / np.linalg.norm(ones)
        if res >= rtol:
            raise NumericalError(f"(I - P) x = 1 not solved to {rtol}: residual {res:.3g}")
    return x


def arl_markov(config: ArlConfig) -> float:
    """Average run length of scalar NEWMA from the discretized Markov chain."""
    chain = build_arl_chain(config)
    x = solve_expected_run_length(chain.P)
    return float(x[chain.start])


def arl_markov_extrapolated(config: ArlConfig) -> float:
    """Richardson extrapolation of :func:`arl_markov` over two grid sizes.

    Pairs of cells on the edge of the continuation set straddle the
    threshold, so the chain behaves as if the threshold were about
    ``(floor(tau/eps) + 1/2) eps``. Snapping ``eps`` down to ``tau / k`` for
    an integer ``k`` makes that offset exactly ``eps/2`` on both grids, and
    ``2 T(eps'/2) - T(eps')`` cancels it.
    """
    from dataclasses import replace

    eps = config.tau / math.ceil(config.tau / config.eps - 1e-9)
    coarse = arl_markov(replace(config, eps=eps))
    fine = arl_markov(replace(config, eps=eps / 2))
    return 2.0 * fine - coarse


@dataclass(frozen=True)
class ArlEstimate:
    mean: float
    stderr: float
    runs: int
    censored: int
    horizon: int
    run_lengths: np.ndarray = field(repr=False)

    @property
    def inconclusive(self) -> bool:
        return self.censored == self.runs


def arl_monte_carlo(
    big_lambda: float,
    small_lambda: float,
    tau: float,
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    runs: int = 1000,
    horizon: int = 1_000_000,
    seed: int = 0,
    z0: float = 0.0,
) -> ArlEstimate:
    """Mean first-alarm time of scalar NEWMA over independent null runs.

    ``sampler(rng, n)`` returns ``n`` draws of ``Psi(X)``. Runs still
    silent at ``horizon`` are censored and left out of the mean.
    """
    if runs < 100:
        raise ConfigurationError("need at least 100 runs")
    if not (0.0 < small_lambda < big_lambda < 1.0):
        raise ConfigurationError("need 0 < small_lambda < big_lambda < 1")
    rng = np.random.default_rng(seed)
    z = np.full(runs, float(z0))
    zp = np.full(runs, float(z0))
    alive = np.arange(runs)
    stop = np.full(runs, -1, dtype=np.int64)
    t = 0
    while alive.size and t < horizon:
        t += 1
        psi = sampler(rng, alive.size)
        z[alive] = (1 - big_lambda) * z[alive] + big_lambda * psi
        zp[alive] = (1 - small_lambda) * zp[alive] + small_lambda * psi
        hit = np.abs(z[alive] - zp[alive]) >= tau
        stop[alive[hit]] = t
        alive = alive[~hit]
    done = stop[stop > 0].astype(float)
    if done.size == 0:
        mean, stderr = math.nan, math.nan
    else:
        mean = float(done.mean())
        stderr = float(done.std(ddof=1) / math.sqrt(done.size)) if done.size > 1 else math.nan
    return ArlEstimate(mean, stderr, runs, int(alive.size), horizon, stop)


def null_law_scale(c: float) -> float:
    """``(1 - c)^2 / (2 (1 + c))`` for ``c = big_lambda / small_lambda``."""
    if not c > 1:
        raise ConfigurationError(f"c = big/small must exceed 1, got {c}")
    return (1 - c) ** 2 / (2 * (1 + c))


@dataclass(frozen=True)
class NullLawConfig:
    eigenvalues: np.ndarray
    c: float

    def __post_init__(self) -> None:
        xi = np.asarray(self.eigenvalues, dtype=float)
        if xi.ndim != 1 or xi.size < 1 or (xi < 0).any():
            raise ConfigurationError("eigenvalues must be a non-empty vector of non-negative values")
        null_law_scale(self.c)

    @property
    def G(self) -> float:
        return null_law_scale(self.c)

    @property
    def mean(self) -> float:
        return self.G * float(np.sum(self.eigenvalues))

    @property
    def variance(self) -> float:
        xi = np.asarray(self.eigenvalues, dtype=float)
        return 2 * self.G**2 * float(np.sum(xi**2))


def simulate_null_law(config: NullLawConfig, n_draws: int, seed: int = 0) -> np.ndarray:
    """I.i.d. draws of ``G sum_l xi_l W_l^2`` with standard normal ``W_l``."""
    if n_draws < 1:
        raise ConfigurationError("n_draws must be >= 1")
    xi = np.asarray(config.eigenvalues, dtype=float)
    W = np.random.default_rng(seed).standard_normal((n_draws, xi.size))
    return config.G * (W**2 @ xi)


def cosine_features(x: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray:
    """``[sqrt(xi_l) sqrt(2) cos(2 pi l x)]_l`` for each entry of ``x``."""
    ell = np.arange(1, len(eigenvalues) + 1)
    return np.sqrt(2.0 * np.asarray(eigenvalues))[None, :] * np.cos(2 * np.pi * np.outer(x, ell))


def minimal_null_time(small_lambda: float) -> int:
    return math.ceil((2.0 / small_lambda) * math.log(1.0 / small_lambda))


@dataclass(frozen=True)
class NullLawExperiment:
    scaled_statistic: np.ndarray
    law_samples: np.ndarray
    eigenvalues: np.ndarray
    t: int
    seed: int
    ks_distance: float
    expected_mean: float


def null_law_toy_experiment(
    big_lambda: float = 0.02,
    small_lambda: float = 0.01,
    n_eigen: int = 30,
    n_sims: int = 1000,
    seed: int = 0,
    t: int | None = None,
) -> NullLawExperiment:
    """Compare ``||z_t - z'_t||^2 / small_lambda`` with its limiting law.

    Samples are Uniform[0, 1] and ``Psi`` stacks the cosine eigenfunctions
    ``sqrt(2) cos(2 pi l x)`` scaled by ``sqrt(xi_l)``; the ``xi_l`` are
    i.i.d. Uniform(0, 1) normalized to sum to one. NEWMA runs ``t`` steps
    (default: the smallest time covered by the limit theorem).
    """
    from .seeding import make_rng

    if not (0.0 < small_lambda < big_lambda < 1.0):
        raise ConfigurationError("need 0 < small_lambda < big_lambda < 1")
    rng_xi = make_rng(seed, 0)
    xi = rng_xi.uniform(size=n_eigen)
    xi /= xi.sum()
    t = minimal_null_time(small_lambda) if t is None else int(t)
    rng = make_rng(seed, 1)
    z = np.zeros((n_sims, n_eigen))
    zp = np.zeros((n_sims, n_eigen))
    for _ in range(t):
        psi = cosine_features(rng.uniform(size=n_sims), xi)
        z = (1 - big_lambda) * z + big_lambda * psi
        zp = (1 - small_lambda) * zp + small_lambda * psi
    scaled = ((z - zp) ** 2).sum(axis=1) / small_lambda
    law = NullLawConfig(xi, big_lambda / small_lambda)
    y = simulate_null_law(law, n_sims, seed=int(make_rng(seed, 2).integers(2**63)))
    ks = float(ks_2samp(scaled, y).statistic)
    return NullLawExperiment(scaled, y, xi, t, seed, ks, law.mean)


def gaussian_kernel_mmd2(
    mean1: np.ndarray, cov1: np.ndarray, mean2: np.ndarray, cov2: np.ndarray, sigma: float
) -> float:
    """Closed-form squared MMD between two Gaussians for the Gaussian kernel."""
    m1, m2 = np.asarray(mean1, float), np.asarray(mean2, float)
    A, Bc = np.atleast_2d(cov1), np.atleast_2d(cov2)
    d = m1.size
    s2 = sigma * sigma

    def expected_kernel(mu: np.ndarray, S: np.ndarray) -> float:
        _, logdet = np.linalg.slogdet(np.eye(d) + S / s2)
        quad = mu @ np.linalg.solve(s2 * np.eye(d) + S, mu)
        return math.exp(-0.5 * logdet - 0.5 * quad)

    zero = np.zeros(d)
    return expected_kernel(zero, 2 * A) + expected_kernel(zero, 2 * Bc) - 2 * expected_kernel(m1 - m2, A + Bc)
