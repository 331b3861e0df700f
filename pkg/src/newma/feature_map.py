"""Generalized-moment embeddings used by the detectors.

A feature map turns a raw sample ``x`` in R^d into a vector whose mean under
the data distribution is the quantity being monitored. Besides the trivial
ones (identity, raw monomials, histogram indicators) two kernel random-feature
maps are provided; both approximate the Gaussian kernel

    k(x, y) = exp(-||x - y||^2 / (2 sigma^2)).

Complex features exp(i w.x) / sqrt(m) are stored as interleaved
``(cos, sin)`` real pairs, so the Hermitian norm of the complex vector is the
Euclidean norm of the packed one and every detector stays real-valued.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .errors import (
    ConfigurationError,
    DegenerateBandwidthError,
    InputError,
    UnsupportedOperationError,
)

KINDS = ("identity", "moments", "histogram", "rff", "fastfood")

MEDIAN_TRICK_MAX_POINTS = 500


def next_power_of_two(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis.

    The length of the last axis must be a power of two. Returns a new array;
    the input is left untouched.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[-1]
    if n & (n - 1):
        raise InputError(f"Hadamard length must be a power of two, got {n}")
    lead = a.shape[:-1]
    h = 1
    while h < n:
        a = a.reshape(*lead, n // (2 * h), 2, h)
        x = a[..., 0, :]
        y = a[..., 1, :]
        a = np.stack((x + y, x - y), axis=-2)
        h *= 2
    return a.reshape(*lead, n)


@dataclass(frozen=True)
class FeatureMapSpec:
    """Serializable description of a feature map.

    Frozen random parameters are never stored; they are regenerated from
    ``seed`` by :func:`build_feature_map`.
    """

    kind: str
    d: int
    m: int | None = None
    sigma: float | None = None
    seed: int = 0
    order: int | None = None
    bins: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown feature map kind {self.kind!r}")
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise ConfigurationError(f"input dimension must be a positive integer, got {self.d!r}")
        if self.kind == "moments":
            if self.order is None or self.order < 1:
                raise ConfigurationError("moments map needs a positive order")
        elif self.kind == "histogram":
            if not self.bins:
                raise ConfigurationError("histogram map needs at least one bin")
            for lo, hi in self.bins:
                if len(lo) != self.d or len(hi) != self.d:
                    raise ConfigurationError("histogram bin corners must have length d")
        elif self.kind in ("rff", "fastfood"):
            if self.m is None or self.m <= 0:
                raise ConfigurationError(f"feature count m must be positive, got {self.m!r}")
            if self.sigma is None or not self.sigma > 0 or not math.isfinite(self.sigma):
                raise ConfigurationError(f"bandwidth sigma must be positive, got {self.sigma!r}")
            if self.kind == "fastfood" and self.m % self.padded_dim != 0:
                raise ConfigurationError(
                    f"fastfood m={self.m} must be a multiple of the padded dimension {self.padded_dim}"
                )

    @property
    def padded_dim(self) -> int:
        return next_power_of_two(self.d)

    @property
    def output_dim(self) -> int:
        if self.kind == "identity":
            return self.d
        if self.kind == "moments":
            return math.comb(self.d + self.order, self.order) - 1
        if self.kind == "histogram":
            return len(self.bins)
        return 2 * self.m

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "d": self.d}
        if self.kind in ("rff", "fastfood"):
            out.update(m=self.m, sigma=self.sigma, seed=self.seed)
        elif self.kind == "moments":
            out["order"] = self.order
        elif self.kind == "histogram":
            out["bins"] = [[list(lo), list(hi)] for lo, hi in self.bins]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "FeatureMapSpec":
        obj = dict(obj)
        bins = obj.pop("bins", None)
        if bins is not None:
            bins = tuple((tuple(map(float, lo)), tuple(map(float, hi))) for lo, hi in bins)
        known = {"kind", "d", "m", "sigma", "seed", "order"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigurationError(f"unknown feature map fields: {sorted(unknown)}")
        try:
            return cls(bins=bins, **obj)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "FeatureMapSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """A frozen embedding built from a :class:`FeatureMapSpec`.

    Use :meth:`embed` for one sample and :meth:`embed_batch` for a 2-D array
    of samples (rows). Both are pure.
    """

    spec: FeatureMapSpec
    params: dict[str, np.ndarray] = field(repr=False)

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def output_dim(self) -> int:
        return self.spec.output_dim

    @property
    def bound(self) -> float | None:
        """``sup_x ||Psi(x)||`` when finite, else ``None``."""
        kind = self.spec.kind
        if kind in ("rff", "fastfood"):
            return 1.0
        if kind == "histogram":
            return math.sqrt(len(self.spec.bins))
        return None

    @property
    def is_kernel(self) -> bool:
        return self.spec.kind in ("rff", "fastfood")

    def embed(self, x: Sequence[float] | np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.d:
            raise InputError(f"expected a sample of dimension {self.d}, got shape {x.shape}")
        return self._apply(x[None, :])[0]

    def embed_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise InputError(f"expected an (n, {self.d}) array, got shape {X.shape}")
        return self._apply(X)

    def frequencies(self) -> np.ndarray:
        """Dense (m, d) frequency matrix; materialized on demand for Fastfood."""
        if self.spec.kind == "rff":
            return self.params["W"].copy()
        if self.spec.kind == "fastfood":
            return self._fastfood_project(np.eye(self.spec.padded_dim)).T[:, : self.d]
        raise UnsupportedOperationError(f"{self.spec.kind} map has no frequencies")

    def project(self, X: np.ndarray) -> np.ndarray:
        """Return the (n, m) matrix of phases ``w_j . x_i``."""
        if self.spec.kind == "rff":
            return X @ self.params["W"].T
        if self.spec.kind == "fastfood":
            return self._fastfood_project(X)
        raise UnsupportedOperationError(f"{self.spec.kind} map has no frequencies")

    def _fastfood_project(self, X: np.ndarray) -> np.ndarray:
        p = self.params
        n = X.shape[0]
        dp = self.spec.padded_dim
        if X.shape[1] < dp:
            X = np.pad(X, ((0, 0), (0, dp - X.shape[1])))
        # V x = S H G Pi H B x / (sigma sqrt(d')), one block per row of B
        Y = fwht(X[:, None, :] * p["B"][None, :, :])
        Y = np.take_along_axis(Y, np.broadcast_to(p["Pi"], Y.shape), axis=-1)
        Y = fwht(Y * p["G"][None, :, :])
        Y *= p["S"][None, :, :] / (self.spec.sigma * math.sqrt(dp))
        return Y.reshape(n, -1)

    def _apply(self, X: np.ndarray) -> np.ndarray:
        kind = self.spec.kind
        if kind == "identity":
            return X.copy()
        if kind == "moments":
            cols = [np.prod(X[:, list(idx)], axis=1) for idx in self.params["monomials"]]
            return np.stack(cols, axis=1)
        if kind == "histogram":
            lo, hi = self.params["lo"], self.params["hi"]
            inside = (X[:, None, :] >= lo[None]) & (X[:, None, :] < hi[None])
            return inside.all(axis=2).astype(float)
        phase = self.project(X)
        out = np.empty((X.shape[0], 2 * phase.shape[1]))
        out[:, 0::2] = np.cos(phase)
        out[:, 1::2] = np.sin(phase)
        out /= math.sqrt(phase.shape[1])
        return out


def build_feature_map(spec: FeatureMapSpec) -> FeatureMap:
    """Draw the frozen parameters of ``spec`` from its seed."""
    rng = np.random.default_rng(spec.seed)
    params: dict[str, Any] = {}
    if spec.kind == "moments":
        params["monomials"] = [
            idx
            for deg in range(1, spec.order + 1)
            for idx in itertools.combinations_with_replacement(range(spec.d), deg)
        ]
    elif spec.kind == "histogram":
        params["lo"] = np.array([lo for lo, _ in spec.bins], dtype=float)
        params["hi"] = np.array([hi for _, hi in spec.bins], dtype=float)
    elif spec.kind == "rff":
        params["W"] = rng.normal(0.0, 1.0 / spec.sigma, size=(spec.m, spec.d))
    elif spec.kind == "fastfood":
        dp = spec.padded_dim
        blocks = spec.m // dp
        G = rng.normal(size=(blocks, dp))
        params["B"] = rng.choice(np.array([-1.0, 1.0]), size=(blocks, dp))
        params["G"] = G
        params["Pi"] = np.stack([rng.permutation(dp) for _ in range(blocks)])
        # row norms of V follow the chi law of a dense Gaussian row
        chi = np.sqrt(rng.chisquare(dp, size=(blocks, dp)))
        params["S"] = chi / np.linalg.norm(G, axis=1, keepdims=True)
    return FeatureMap(spec=spec, params=params)


def gaussian_kernel(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return math.exp(-float(diff @ diff) / (2.0 * sigma * sigma))


def kernel_estimate(fmap: FeatureMap, x, y) -> float:
    """Random-feature estimate ``Re <Psi(x), Psi(y)>`` of the Gaussian kernel."""
    if not fmap.is_kernel:
        raise UnsupportedOperationError(f"{fmap.spec.kind} map does not approximate a kernel")
    return float(fmap.embed(x) @ fmap.embed(y))


def median_trick_bandwidth(
    samples: np.ndarray,
    seed: int = 0,
    max_points: int = MEDIAN_TRICK_MAX_POINTS,
) -> float:
    """Median pairwise Euclidean distance of ``samples``.

    Beyond ``max_points`` rows, the median is taken over a seeded random
    subset of that size.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ConfigurationError("median trick needs at least two samples")
    if X.shape[0] > max_points:
        idx = np.random.default_rng(seed).choice(X.shape[0], size=max_points, replace=False)
        X = X[np.sort(idx)]
    sigma = float(np.median(pdist(X)))
    if not sigma > 0:
        raise DegenerateBandwidthError("median pairwise distance is zero")
    return sigma
