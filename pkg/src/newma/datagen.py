"""Synthetic piecewise-stationary streams.

The main generator produces segments of ``n`` i.i.d. samples from a
Gaussian mixture whose parameters are redrawn at every segment boundary:
component means from ``N(0, mean_scale^2 Id)``, covariances from an
inverse-Wishart law and weights from a symmetric Dirichlet.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigurationError, NumericalError
from .seeding import make_rng


@dataclass(frozen=True)
class GmmStreamSpec:
    d: int
    k: int
    n: int
    n_changes: int
    seed: int = 0
    mean_scale: float = 1.0
    wishart_dof: float | None = None  # default d + 10
    dirichlet_alpha: float = 1.0
    identity_covariance: bool = False

    def __post_init__(self) -> None:
        if self.d < 1 or self.k < 1:
            raise ConfigurationError("need d >= 1 and k >= 1")
        if self.n < 1 or self.n_changes < 0:
            raise ConfigurationError("need n >= 1 and n_changes >= 0")
        if self.mean_scale < 0:
            raise ConfigurationError("mean_scale must be >= 0")
        if not self.dirichlet_alpha > 0:
            raise ConfigurationError("dirichlet_alpha must be positive")
        if not self.dof > self.d + 1:
            raise ConfigurationError(f"wishart_dof must exceed d+1={self.d + 1}, got {self.dof}")

    @property
    def dof(self) -> float:
        return self.d + 10 if self.wishart_dof is None else float(self.wishart_dof)

    @property
    def n_samples(self) -> int:
        return (self.n_changes + 1) * self.n

    @property
    def change_points(self) -> list[int]:
        return [self.n * (s + 1) for s in range(self.n_changes)]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["wishart_dof"] = self.dof
        return out


@dataclass(frozen=True)
class GmmParams:
    means: np.ndarray  # (k, d)
    covariances: np.ndarray  # (k, d, d)
    cholesky: np.ndarray  # (k, d, d) lower factors of the covariances
    weights: np.ndarray  # (k,)

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.means


def sample_inverse_wishart(rng: np.random.Generator, d: int, dof: float) -> np.ndarray:
    """Draw ``Sigma ~ IW(dof, Id)`` as the inverse of a Bartlett-factored Wishart."""
    A = np.tril(rng.standard_normal((d, d)), -1)
    A[np.diag_indices(d)] = np.sqrt(rng.chisquare(dof - np.arange(d)))
    # W = A A^T ~ Wishart(dof, Id); Sigma = W^{-1} = A^{-T} A^{-1}
    Ainv = np.linalg.solve(np.tril(A), np.eye(d))
    sigma = Ainv.T @ Ainv
    return 0.5 * (sigma + sigma.T)


def draw_gmm_params(spec: GmmStreamSpec, rng: np.random.Generator) -> GmmParams:
    d, k = spec.d, spec.k
    means = spec.mean_scale * rng.standard_normal((k, d))
    if spec.identity_covariance:
        covs = np.broadcast_to(np.eye(d), (k, d, d)).copy()
    else:
        covs = np.stack([sample_inverse_wishart(rng, d, spec.dof) for _ in range(k)])
    try:
        chol = np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance draw is not positive definite: {exc}") from None
    weights = rng.dirichlet(np.full(k, spec.dirichlet_alpha))
    weights /= weights.sum()
    return GmmParams(means, covs, chol, weights)


def sample_gmm(params: GmmParams, n: int, rng: np.random.Generator) -> np.ndarray:
    k, d = params.means.shape
    labels = rng.choice(k, size=n, p=params.weights)
    noise = rng.standard_normal((n, d))
    out = np.empty((n, d))
    for j in range(k):
        rows = labels == j
        out[rows] = params.means[j] + noise[rows] @ params.cholesky[j].T
    return out


def iter_gmm_segments(spec: GmmStreamSpec) -> Iterator[tuple[GmmParams, np.ndarray]]:
    """Yield ``(parameters, samples)`` per segment without holding the whole stream.

    Segment ``s`` draws from its own generator keyed by ``(seed, s)``.
    """
    for s in range(spec.n_changes + 1):
        rng = make_rng(spec.seed, s)
        params = draw_gmm_params(spec, rng)
        yield params, sample_gmm(params, spec.n, rng)


def generate_gmm_stream(spec: GmmStreamSpec) -> tuple[np.ndarray, list[int]]:
    """All ``(n_changes + 1) n`` samples of the stream and its change points."""
    X = np.empty((spec.n_samples, spec.d))
    for s, (_, seg) in enumerate(iter_gmm_segments(spec)):
        X[s * spec.n : (s + 1) * spec.n] = seg
    return X, spec.change_points


def generate_shift_stream(d: int, n: int, delta, seed: int = 0) -> tuple[np.ndarray, list[int]]:
    """``n`` draws of ``N(0, Id)`` followed by ``n`` draws of ``N(delta, Id)``."""
    if n < 2:
        raise ConfigurationError("n must be >= 2")
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (d,))
    rng = make_rng(seed, 0)
    X = rng.standard_normal((2 * n, d))
    X[n:] += delta
    return X, [n]
