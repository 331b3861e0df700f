"""Independent reference implementations used as test oracles.

Written with plain loops and textbook formulas, deliberately sharing no code
with the package.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq


def window_of(big: float, small: float) -> int:
    return math.ceil(math.log(big / small) / math.log((1 - small) / (1 - big)))


def decomposition_weights(big: float, small: float, t: int):
    """``(C, recent, past)`` with ``z_t - z'_t = C (recent . psi[t-B+1..t] - past[0] z0 - past[1:] . psi[1..t-B])``."""
    B = window_of(big, small)
    alpha = [big * (1 - big) ** (t - i) for i in range(t + 1)]
    beta = [small * (1 - small) ** (t - i) for i in range(t + 1)]
    alpha[0] = (1 - big) ** t
    beta[0] = (1 - small) ** t
    C = (1 - small) ** B - (1 - big) ** B
    recent = np.array([(alpha[i] - beta[i]) / C for i in range(t - B + 1, t + 1)])
    past = np.array([(beta[i] - alpha[i]) / C for i in range(0, t - B + 1)])
    return C, recent, past


def newma_statistics(psi: np.ndarray, big: float, small: float, z0=None) -> list[float]:
    z = np.zeros(psi.shape[1]) if z0 is None else np.array(z0, dtype=float)
    zp = z.copy()
    out = []
    for row in psi:
        z = (1 - big) * z + big * row
        zp = (1 - small) * zp + small * row
        out.append(float(np.sqrt(((z - zp) ** 2).sum())))
    return out


def window_means(psi: np.ndarray, t: int, B: int):
    """Means over steps (t-2B, t-B] and (t-B, t] (1-based)."""
    return psi[t - 2 * B : t - B].mean(axis=0), psi[t - B : t].mean(axis=0)


def small_lambda_root(big: float, B: int) -> float:
    target = big * (1 - big) ** B
    if target > 1e-280:
        f = lambda x: x * (1 - x) ** B - target  # noqa: E731
        return brentq(f, 1e-300, 1.0 / (B + 1), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    # target underflows: root-find log x instead
    log_target = math.log(big) + B * math.log1p(-big)
    g = lambda u: u + B * math.log1p(-math.exp(u)) - log_target  # noqa: E731
    return math.exp(brentq(g, log_target - 1.0, -math.log(B + 1), xtol=1e-14, maxiter=1000))


def gauss(x, y, sigma):
    return math.exp(-sum((a - b) ** 2 for a, b in zip(x, y)) / (2 * sigma * sigma))


def scanb_statistic(window: np.ndarray, B: int, N: int, sigma: float) -> float:
    """Mean over reference blocks of the unbiased MMD^2 against the last block, by double loops."""
    test = window[N * B : (N + 1) * B]
    vals = []
    for j in range(N):
        ref = window[j * B : (j + 1) * B]
        total = 0.0
        for a in range(B):
            for b in range(B):
                if a == b:
                    continue
                total += (
                    gauss(ref[a], ref[b], sigma)
                    + gauss(test[a], test[b], sigma)
                    - gauss(ref[a], test[b], sigma)
                    - gauss(ref[b], test[a], sigma)
                )
        vals.append(total / (B * (B - 1)))
    return float(np.mean(vals))


def score_by_hand(flags, change_points, n):
    """Per-change (false alarms, delay) using direct interval membership."""
    out = []
    for c in change_points:
        fa = sum(1 for f in flags if c - n / 2 < f <= c)
        post = [f for f in flags if c < f <= c + n / 2]
        out.append((fa, post[0] - c if post else None))
    return out
