"""Hyperparameter machinery for NEWMA.

Relates the pair of forgetting factors (big_lambda > small_lambda) to the
window size B they implicitly compare, picks both factors from a
user-supplied B, sizes the random-feature count, and evaluates the
high-probability bounds on the detection statistic.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError

LAMBDA_GRID_SIZE = 1000
# below this log, a float loses precision (subnormal range)
LOG_TINY = math.log(sys.float_info.min)


def _check_factors(big_lambda: float, small_lambda: float) -> None:
    if not (0.0 < small_lambda < big_lambda < 1.0):
        raise ConfigurationError(
            f"forgetting factors must satisfy 0 < small < big < 1, got big={big_lambda}, small={small_lambda}"
        )


def window_size(big_lambda: float, small_lambda: float) -> int:
    """Number of recent samples NEWMA compares against older ones."""
    _check_factors(big_lambda, small_lambda)
    ratio = (math.log(big_lambda) - math.log(small_lambda)) / (math.log1p(-small_lambda) - math.log1p(-big_lambda))
    if not math.isfinite(ratio):
        raise NumericalError(f"window size overflows for big={big_lambda}, small={small_lambda}")
    return max(1, math.ceil(ratio))


def decomposition_constant(big_lambda: float, small_lambda: float, B: int | None = None) -> float:
    """``C = (1 - small)^B - (1 - big)^B``, the gain applied to the moment gap."""
    if B is None:
        B = window_size(big_lambda, small_lambda)
    return (1 - small_lambda) ** B - (1 - big_lambda) ** B


@dataclass(frozen=True)
class WindowDecomposition:
    """Weights rewriting ``z_t - z'_t`` as a difference of two weighted means.

    ``recent`` holds the weights of samples ``t-B+1 .. t`` (oldest first) and
    ``past`` those of ``z_0, x_1, .. x_{t-B}``. Both sum to one and

        z_t - z'_t = C * (sum recent * Psi(x) - past[0] z_0 - sum past[1:] * Psi(x)).
    """

    B: int
    C: float
    recent: np.ndarray
    past: np.ndarray


def window_decomposition(big_lambda: float, small_lambda: float, t: int) -> WindowDecomposition:
    B = window_size(big_lambda, small_lambda)
    if t <= B:
        raise ConfigurationError(f"decomposition needs t > B={B}, got t={t}")
    i = np.arange(t + 1)
    alpha = big_lambda * (1 - big_lambda) ** (t - i)
    beta = small_lambda * (1 - small_lambda) ** (t - i)
    alpha[0] = (1 - big_lambda) ** t
    beta[0] = (1 - small_lambda) ** t
    C = decomposition_constant(big_lambda, small_lambda, B)
    recent = (alpha[t - B + 1 :] - beta[t - B + 1 :]) / C
    past = (beta[: t - B + 1] - alpha[: t - B + 1]) / C
    return WindowDecomposition(B=B, C=C, recent=recent, past=past)


def solve_lambda(big_lambda: float, B: int, tol: float = 1e-15) -> float:
    """Small forgetting factor giving window size ``B`` together with ``big_lambda``.

    Solves ``x (1 - x)^B = big (1 - big)^B`` on the increasing branch
    ``(0, 1/(B+1)]`` by bisection. The search runs on ``log x`` so that the
    solution keeps full relative precision when it is tiny.
    """
    if B < 1:
        raise ConfigurationError(f"window size must be >= 1, got {B}")
    if not (1.0 / (B + 1) < big_lambda < 1.0):
        raise ConfigurationError(
            f"big_lambda={big_lambda} must lie in (1/(B+1), 1) = ({1.0 / (B + 1):.6g}, 1) for a distinct solution"
        )
    target = math.log(big_lambda) + B * math.log1p(-big_lambda)

    def g(u: float) -> float:
        return u + B * math.log1p(-math.exp(u))

    # on (0, 1/(B+1)]: log x - 1 <= g(log x) <= log x, so the root lies in [target, target + 1]
    lo, hi = target, min(target + 1.0, -math.log(B + 1))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    root = 0.5 * (lo + hi)
    if root < LOG_TINY:
        raise NumericalError(f"small forgetting factor for big={big_lambda}, B={B} underflows double precision")
    return math.exp(root)


def forgetting_factor_objective(big_lambda: float, B: int) -> float:
    """Ratio minimized by :func:`choose_forgetting_factors` (inf where undefined)."""
    try:
        small = solve_lambda(big_lambda, B)
    except NumericalError:
        return math.inf
    C = (1 - small) ** B - (1 - big_lambda) ** B
    if not C > 0:
        return math.inf
    return (math.sqrt(small + big_lambda) + (1 - small) ** (2 * B) - (1 - big_lambda) ** (2 * B)) / C


def lambda_grid(B: int, n: int = LAMBDA_GRID_SIZE) -> np.ndarray:
    """``n`` evenly spaced interior points of ``(1/(B+1), 1)``."""
    lo = 1.0 / (B + 1)
    return lo + (1.0 - lo) * np.arange(1, n + 1) / (n + 1)


def choose_forgetting_factors(B: int, grid_size: int = LAMBDA_GRID_SIZE) -> tuple[float, float]:
    """Pick ``(big, small)`` for window size ``B`` by exhaustive grid search."""
    if B < 2:
        raise ConfigurationError(f"window size must be >= 2, got {B}")
    grid = lambda_grid(B, grid_size)
    values = np.array([forgetting_factor_objective(float(g), B) for g in grid])
    big = float(grid[int(np.argmin(values))])
    return big, solve_lambda(big, B)


def choose_num_features(big_lambda: float, small_lambda: float, scale: float = 0.25) -> int:
    """Random-feature count ``ceil(scale / (big + small)^2)``."""
    _check_factors(big_lambda, small_lambda)
    if not scale > 0:
        raise ConfigurationError("scale must be positive")
    value = scale / (big_lambda + small_lambda) ** 2
    # absorb round-off so exact values like 100.00000000000001 do not round up
    return max(1, math.ceil(value * (1 - 1e-12)))


@dataclass(frozen=True)
class BoundReport:
    eps1: float
    eps2: float
    epsm: float | None
    rho: float
    M: float
    C: float
    min_detectable: float

    @property
    def null_bound(self) -> float:
        return self.eps1 + self.eps2


def detection_bounds(
    big_lambda: float,
    small_lambda: float,
    t: int,
    rho: float,
    M: float,
    m: int | None = None,
    init_gap: float | None = None,
) -> BoundReport:
    """High-probability bounds on ``||z_t - z'_t||`` at a fixed time ``t``.

    Under the null the statistic stays below ``eps1 + eps2`` with probability
    at least ``1 - rho``. ``init_gap`` is ``||z_0 - E Psi(x)||``; it defaults
    to its worst case ``2 M``. ``epsm`` is the extra random-feature error on
    the squared MMD when ``m`` features are used.
    """
    _check_factors(big_lambda, small_lambda)
    B = window_size(big_lambda, small_lambda)
    if t <= B:
        raise ConfigurationError(f"bounds need t > B={B}, got t={t}")
    if not (0.0 < rho < 1.0):
        raise ConfigurationError(f"rho must lie in (0, 1), got {rho}")
    if not M > 0:
        raise ConfigurationError(f"M must be positive, got {M}")
    log_term = math.log(1.0 / rho)
    eps1 = 4 * math.sqrt(2) * M * math.sqrt((big_lambda + small_lambda) * log_term)
    gap = 2 * M if init_gap is None else float(init_gap)
    eps2 = ((1 - small_lambda) ** t - (1 - big_lambda) ** t) * gap
    epsm = None
    if m is not None:
        if m < 1:
            raise ConfigurationError("m must be positive")
        epsm = 2 * math.sqrt(2) * M**2 * math.sqrt(log_term) / math.sqrt(m)
    C = decomposition_constant(big_lambda, small_lambda, B)
    return BoundReport(
        eps1=eps1,
        eps2=eps2,
        epsm=epsm,
        rho=rho,
        M=M,
        C=C,
        min_detectable=2 * (eps1 + eps2) / C,
    )


@dataclass(frozen=True)
class Calibration:
    """Outcome of :func:`auto_calibrate`; ``sigma`` is ``None`` without data."""

    window: int
    big_lambda: float
    small_lambda: float
    m: int
    sigma: float | None

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "big_lambda": self.big_lambda,
            "small_lambda": self.small_lambda,
            "m": self.m,
            "sigma": self.sigma,
        }


def auto_calibrate(
    B: int,
    samples: np.ndarray | None = None,
    scale: float = 0.25,
    seed: int = 0,
    multiple_of: int = 1,
) -> Calibration:
    """Forgetting factors, feature count and bandwidth for window size ``B``.

    ``multiple_of`` rounds the feature count up (Fastfood needs a multiple of
    the padded input dimension).
    """
    from .feature_map import median_trick_bandwidth

    big, small = choose_forgetting_factors(B)
    m = choose_num_features(big, small, scale)
    m = multiple_of * math.ceil(m / multiple_of)
    sigma = None if samples is None else median_trick_bandwidth(samples, seed=seed)
    return Calibration(window=B, big_lambda=big, small_lambda=small, m=m, sigma=sigma)
