"""Online change-point detectors sharing one streaming interface.

Every detector consumes one raw sample per :meth:`step` call and returns a
:class:`StepResult`. Four algorithms are available:

* :class:`Newma`: two exponentially weighted averages of ``Psi(x)`` with
  forgetting factors ``big_lambda > small_lambda``; the statistic is the norm
  of their difference. Memory is two feature vectors, whatever the window.
* :class:`Ewma`: one average compared with known in-control moments.
* :class:`SlidingWindow`: mean of ``Psi`` over the last ``B`` samples against
  the ``B`` samples before; keeps ``2B`` embedded samples.
* :class:`ScanB`: averaged unbiased MMD^2 between the newest block of ``B``
  raw samples and ``N`` reference blocks, with incremental Gram sums.

No detector flags before it has seen ``2B`` samples (Scan-B: before its
statistic exists, i.e. ``(N+1)B`` samples).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from scipy.spatial.distance import cdist

from .calibration import window_size
from .errors import ConfigurationError, InputError, NewmaError
from .feature_map import FeatureMap, FeatureMapSpec, build_feature_map
from .thresholding import AdaptiveThreshold, FixedThreshold

Threshold = FixedThreshold | AdaptiveThreshold

STREAM_CHUNK = 256


@dataclass(frozen=True, slots=True)
class StepResult:
    """Output of one detector step.

    ``valid`` is false while the statistic does not exist yet (SW, Scan-B
    warm-up; ``statistic`` is then NaN). ``armed`` is false while flags are
    suppressed.
    """

    t: int
    statistic: float
    threshold: float
    flagged: bool
    valid: bool = True
    armed: bool = True

    def to_record(self) -> dict:
        stat = self.statistic if self.valid else None
        thresh = self.threshold if (self.armed and math.isfinite(self.threshold)) else None
        return {"t": self.t, "stat": stat, "thresh": thresh, "flag": bool(self.flagged)}


class Detector:
    """Common step/threshold plumbing; subclasses implement ``_update``."""

    name = "detector"

    def __init__(self, threshold: Threshold | None, window: int, min_flag_t: int):
        self.window = int(window)
        self.min_flag_t = int(min_flag_t)
        self.threshold = AdaptiveThreshold() if threshold is None else threshold
        self._thr = self.threshold.start(2 * self.window)
        self.t = 0

    def step(self, x) -> StepResult:
        return self._finish(self._update(self._check(x)))

    def step_batch(self, X: np.ndarray) -> list[StepResult]:
        return [self.step(x) for x in X]

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.input_dim:
            raise InputError(f"expected a sample of dimension {self.input_dim}, got shape {x.shape}")
        return x

    def _finish(self, stat: float | None) -> StepResult:
        self.t += 1
        if stat is None:
            return StepResult(self.t, math.nan, math.nan, False, valid=False, armed=False)
        tau, hit = self._thr.update(stat)
        armed = self.t >= self.min_flag_t and self._thr.armed
        return StepResult(self.t, stat, tau, hit and armed, True, armed)

    def _update(self, x: np.ndarray) -> float | None:
        raise NotImplementedError

    @property
    def input_dim(self) -> int:
        raise NotImplementedError


class _EmbeddingDetector(Detector):
    """Detectors that only ever see ``Psi(x)``; batches are embedded at once."""

    def __init__(self, fmap: FeatureMap, threshold, window, min_flag_t):
        self.fmap = fmap
        super().__init__(threshold, window, min_flag_t)

    @property
    def input_dim(self) -> int:
        return self.fmap.d

    def step(self, x) -> StepResult:
        return self._finish(self._update_embedded(self.fmap.embed(self._check(x))))

    def step_batch(self, X: np.ndarray) -> list[StepResult]:
        psi = self.fmap.embed_batch(X)
        return [self._finish(self._update_embedded(row)) for row in psi]

    def _update_embedded(self, psi: np.ndarray) -> float | None:
        raise NotImplementedError


@dataclass(frozen=True)
class NewmaConfig:
    big_lambda: float
    small_lambda: float
    feature_map: FeatureMapSpec
    threshold: Threshold = field(default_factory=AdaptiveThreshold)

    def __post_init__(self) -> None:
        if not (0.0 < self.small_lambda < self.big_lambda < 1.0):
            raise ConfigurationError(
                f"need 0 < small_lambda < big_lambda < 1, got {self.small_lambda}, {self.big_lambda}"
            )

    @property
    def window(self) -> int:
        return window_size(self.big_lambda, self.small_lambda)


class Newma(_EmbeddingDetector):
    """No-prior-knowledge EWMA.

    Both averages start at ``z0`` (zero by default) and are fed the same
    embedded sample each step; the statistic is ``||z_t - z'_t||``.
    """

    name = "newma"

    def __init__(
        self,
        big_lambda: float,
        small_lambda: float,
        fmap: FeatureMap,
        threshold: Threshold | None = None,
        z0: np.ndarray | None = None,
    ):
        B = window_size(big_lambda, small_lambda)
        super().__init__(fmap, threshold, B, 2 * B)
        self.big_lambda = float(big_lambda)
        self.small_lambda = float(small_lambda)
        z0 = np.zeros(fmap.output_dim) if z0 is None else np.array(z0, dtype=float)
        if z0.shape != (fmap.output_dim,):
            raise InputError(f"z0 must have shape ({fmap.output_dim},)")
        self.z0 = z0.copy()
        self.z = z0.copy()
        self.z_prime = z0.copy()

    @classmethod
    def from_config(cls, config: NewmaConfig) -> "Newma":
        return cls(config.big_lambda, config.small_lambda, build_feature_map(config.feature_map), config.threshold)

    @property
    def state_nbytes(self) -> int:
        return self.z.nbytes + self.z_prime.nbytes

    def _update_embedded(self, psi: np.ndarray) -> float:
        self.z = (1 - self.big_lambda) * self.z + self.big_lambda * psi
        self.z_prime = (1 - self.small_lambda) * self.z_prime + self.small_lambda * psi
        return float(np.linalg.norm(self.z - self.z_prime))


class Ewma(_EmbeddingDetector):
    """Classical EWMA against known in-control moments ``theta_star``.

    ``big_lambda = 1`` is allowed and degenerates to ``||Psi(x_t) - theta*||``.
    """

    name = "ewma"

    def __init__(
        self,
        big_lambda: float,
        fmap: FeatureMap,
        theta_star: np.ndarray | None,
        threshold: Threshold | None = None,
        z0: np.ndarray | None = None,
        window: int = 0,
    ):
        if theta_star is None:
            raise ConfigurationError("EWMA needs the in-control moments theta_star")
        if not (0.0 < big_lambda <= 1.0):
            raise ConfigurationError(f"forgetting factor must lie in (0, 1], got {big_lambda}")
        super().__init__(fmap, threshold, window, 2 * window)
        self.theta_star = np.array(theta_star, dtype=float)
        if self.theta_star.shape != (fmap.output_dim,):
            raise ConfigurationError(f"theta_star must have shape ({fmap.output_dim},)")
        self.big_lambda = float(big_lambda)
        self.z = np.zeros(fmap.output_dim) if z0 is None else np.array(z0, dtype=float)

    @property
    def state_nbytes(self) -> int:
        return self.z.nbytes

    def _update_embedded(self, psi: np.ndarray) -> float:
        self.z = (1 - self.big_lambda) * self.z + self.big_lambda * psi
        return float(np.linalg.norm(self.z - self.theta_star))


class SlidingWindow(_EmbeddingDetector):
    """Mean of ``Psi`` over ``(t-2B, t-B]`` against the mean over ``(t-B, t]``.

    Window sums are updated recursively and recomputed exactly from the ring
    buffer every ``2B`` steps so round-off cannot accumulate.
    """

    name = "sw"

    def __init__(self, window: int, fmap: FeatureMap, threshold: Threshold | None = None):
        if window < 1:
            raise ConfigurationError(f"window must be >= 1, got {window}")
        super().__init__(fmap, threshold, window, 2 * window)
        self.buffer = np.zeros((2 * window, fmap.output_dim))
        self.sum_old = np.zeros(fmap.output_dim)
        self.sum_new = np.zeros(fmap.output_dim)

    def _update_embedded(self, psi: np.ndarray) -> float | None:
        B = self.window
        n = self.t + 1  # index of this sample, 1-based
        slot = (n - 1) % (2 * B)
        if n <= 2 * B:
            self.buffer[slot] = psi
            if n <= B:
                self.sum_old += psi
            else:
                self.sum_new += psi
            if n < 2 * B:
                return None
        else:
            leaving = self.buffer[slot].copy()  # Psi(x_{n-2B})
            moving = self.buffer[(n - 1 - B) % (2 * B)]  # Psi(x_{n-B})
            self.sum_old += moving - leaving
            self.sum_new += psi - moving
            self.buffer[slot] = psi
            if n % (2 * B) == 0:
                self._resync(n)
        return float(np.linalg.norm(self.sum_old - self.sum_new)) / B

    def _resync(self, n: int) -> None:
        B = self.window
        order = [(n - 2 * B + k) % (2 * B) for k in range(2 * B)]
        ordered = self.buffer[order]
        self.sum_old = ordered[:B].sum(axis=0)
        self.sum_new = ordered[B:].sum(axis=0)

    def window_means(self) -> tuple[np.ndarray, np.ndarray]:
        return self.sum_old / self.window, self.sum_new / self.window


def _gauss(sqdist: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-sqdist / (2.0 * sigma * sigma))


def scanb_block_sums(window: np.ndarray, B: int, n_blocks: int, sigma: float):
    """Exact Gram sums for a full Scan-B window of ``(N+1)B`` raw samples.

    Returns ``(within, cross, diag)``: off-diagonal within-block kernel sums
    for the ``N+1`` blocks (test block last), full cross sums between each
    reference block and the test block, and sums over aligned pairs.
    """
    N = n_blocks
    blocks = [window[j * B : (j + 1) * B] for j in range(N + 1)]
    test = blocks[N]
    within = np.empty(N + 1)
    for j, blk in enumerate(blocks):
        K = _gauss(cdist(blk, blk, "sqeuclidean"), sigma)
        within[j] = K.sum() - np.trace(K)
    cross = np.empty(N)
    diag = np.empty(N)
    for j in range(N):
        K = _gauss(cdist(blocks[j], test, "sqeuclidean"), sigma)
        cross[j] = K.sum()
        diag[j] = np.trace(K)
    return within, cross, diag


def scanb_mmd2(within, cross, diag, B: int) -> np.ndarray:
    """Per-reference-block unbiased MMD^2 from the Gram sums."""
    N = len(cross)
    return (within[:N] + within[N] - 2.0 * (cross - diag)) / (B * (B - 1))


def scanb_statistic_bruteforce(window: np.ndarray, B: int, n_blocks: int, sigma: float) -> float:
    """Average MMD^2 over reference blocks, recomputed from scratch."""
    return float(scanb_mmd2(*scanb_block_sums(window, B, n_blocks, sigma), B).mean())


def _scanb_update_plan(B: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Linear map from prefix sums of the boundary kernel rows to Gram-sum changes.

    ``cs[r, c]`` is the sum of the first ``c`` kernel values of boundary row
    ``r`` (rows ``0..N``: oldest sample of each block; row ``N+1``: the
    newcomer) against the window extended by the newcomer. Returns flat
    indices into ``cs`` and a matrix whose product with the gathered values
    gives the increments of ``within`` (N+1), ``cross`` (N) and ``diag`` (N).
    """
    L = (N + 1) * B
    width = L + 2
    cols: dict[int, int] = {}
    entries: list[tuple[int, int, float]] = []

    def add(out: int, r: int, c: int, coef: float) -> None:
        key = r * width + c
        entries.append((out, cols.setdefault(key, len(cols)), coef))

    def ksum(out: int, r: int, lo: int, hi: int, coef: float) -> None:
        # coef * sum of K[r, lo:hi]
        add(out, r, hi, coef)
        add(out, r, lo, -coef)

    pN = N * B
    for j in range(N + 1):
        p = j * B
        ksum(j, j + 1, p + 1, p + B, 2.0)
        ksum(j, j, p + 1, p + B, -2.0)
    for j in range(N):
        p = j * B
        c, g = N + 1 + j, 2 * N + 1 + j
        ksum(c, j, pN, pN + B, -1.0)
        ksum(c, N, p, p + B, -1.0)
        ksum(c, j, pN, pN + 1, 1.0)  # leaving aligned pair
        ksum(c, j + 1, pN + 1, pN + B + 1, 1.0)
        ksum(c, N + 1, p + 1, p + B + 1, 1.0)
        ksum(c, j + 1, L, L + 1, -1.0)  # entering aligned pair
        ksum(g, j + 1, L, L + 1, 1.0)
        ksum(g, j, pN, pN + 1, -1.0)
    coef = np.zeros((3 * N + 1, len(cols)))
    for out, col, v in entries:
        coef[out, col] += v
    gather = np.empty(len(cols), dtype=np.intp)
    for key, col in cols.items():
        gather[col] = key
    return gather, coef


class ScanB(Detector):
    """Kernel Scan-B on raw samples with a Gaussian kernel.

    The statistic is the mean over ``n_blocks`` reference blocks of the
    unbiased MMD^2 estimate against the newest block of ``window`` samples,
    clipped at zero (the raw average is kept in :attr:`mmd2`). Blocks slide
    together by one sample per step; the Gram sums are updated from the
    kernel rows of the ``N+2`` samples that cross a block boundary, costing
    ``O(N B d)`` per step.
    """

    name = "scanb"

    def __init__(
        self,
        window: int,
        sigma: float,
        d: int,
        n_blocks: int = 3,
        threshold: Threshold | None = None,
    ):
        if window < 2:
            raise ConfigurationError(f"Scan-B needs blocks of at least 2 samples, got {window}")
        if n_blocks < 1:
            raise ConfigurationError("Scan-B needs at least one reference block")
        if not sigma > 0:
            raise ConfigurationError(f"kernel bandwidth must be positive, got {sigma}")
        L = (n_blocks + 1) * window
        super().__init__(threshold, window, max(L, 2 * window))
        self.sigma = float(sigma)
        self.n_blocks = int(n_blocks)
        self.d = int(d)
        self.span = L
        self._buf = np.zeros((2 * L, d))
        # Gram sums packed as [within (N+1) | cross (N) | diag (N)]
        self._gram = np.zeros(3 * n_blocks + 1)
        N = n_blocks
        self._stat_weights = np.concatenate(
            [np.ones(N), [float(N)], -2.0 * np.ones(N), 2.0 * np.ones(N)]
        ) / (N * window * (window - 1))
        self.mmd2 = math.nan
        self._cs = np.zeros((n_blocks + 2, L + 2))
        self._bnd_pos = np.append(np.arange(n_blocks + 1) * window, L)
        self._gather, self._coef = _scanb_update_plan(window, n_blocks)

    @property
    def input_dim(self) -> int:
        return self.d

    @property
    def within(self) -> np.ndarray:
        return self._gram[: self.n_blocks + 1]

    @property
    def cross(self) -> np.ndarray:
        return self._gram[self.n_blocks + 1 : 2 * self.n_blocks + 1]

    @property
    def diag(self) -> np.ndarray:
        return self._gram[2 * self.n_blocks + 1 :]

    def current_window(self) -> np.ndarray:
        """The last ``(N+1)B`` raw samples, oldest first (valid once full)."""
        s = self.t % self.span
        return self._buf[s : s + self.span]

    def _store(self, x: np.ndarray) -> None:
        slot = self.t % self.span
        self._buf[slot] = x
        self._buf[slot + self.span] = x

    def _update(self, x: np.ndarray) -> float | None:
        L, B, N = self.span, self.window, self.n_blocks
        n = self.t + 1
        if n < L:
            self._store(x)
            return None
        if n == L:
            self._store(x)
            self._gram = np.concatenate(scanb_block_sums(self._buf[:L], B, N, self.sigma))
        else:
            self._slide(x)
        self.mmd2 = float(self._stat_weights @ self._gram)
        return max(self.mmd2, 0.0)

    def _slide(self, x: np.ndarray) -> None:
        """Move every block one sample forward and patch the Gram sums.

        Only kernel rows of the samples crossing a block boundary (the
        oldest sample of each block, plus the newcomer) are evaluated,
        against the current window extended by the newcomer.
        """
        L = self.span
        s = self.t % L
        buf = self._buf
        # the mirror slot of the oldest sample temporarily holds x, so that
        # buf[s : s + L + 1] is the window followed by the newcomer
        buf[s + L] = x
        ext = buf[s : s + L + 1]
        K = cdist(ext[self._bnd_pos], ext, "sqeuclidean")
        K *= -0.5 / (self.sigma * self.sigma)
        np.exp(K, out=K)
        cs = self._cs
        np.cumsum(K, axis=1, out=cs[:, 1:])
        self._gram += self._coef @ cs.ravel()[self._gather]
        buf[s] = x


def run_stream(detector: Detector, samples: Iterable, chunk_size: int = STREAM_CHUNK) -> list[StepResult]:
    return list(iter_stream(detector, samples, chunk_size))


def iter_stream(detector: Detector, samples: Iterable, chunk_size: int = STREAM_CHUNK) -> Iterator[StepResult]:
    """Feed ``samples`` through ``detector`` lazily, one result per sample.

    Samples are grouped into fixed-size chunks so that embeddings are
    computed in batches; the grouping only depends on the sample order, so
    the same stream always yields bit-identical results.
    """
    it = iter(samples)
    while True:
        chunk = list(itertools.islice(it, chunk_size))
        if not chunk:
            return
        try:
            X = np.asarray(chunk, dtype=float)
            if X.ndim != 2:
                raise InputError(f"samples must be vectors, got array of shape {X.shape}")
            results = detector.step_batch(X)
        except NewmaError as exc:
            raise type(exc)(f"at step {detector.t + 1}: {exc}") from exc
        except ValueError as exc:
            raise InputError(f"at step {detector.t + 1}: {exc}") from exc
        yield from results
