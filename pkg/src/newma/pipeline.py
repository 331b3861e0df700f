"""Glue shared by the CLI, the scripts and the tests: build a detector from
a run configuration, stream samples through it and keep the trace."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .calibration import auto_calibrate, choose_num_features, window_size
from .detectors import Detector, Newma, ScanB, SlidingWindow, StepResult, iter_stream
from .errors import ConfigurationError
from .feature_map import FeatureMapSpec, build_feature_map, median_trick_bandwidth
from .seeding import derive_seed
from .thresholding import parse_threshold

ALGORITHMS = ("newma", "sw", "scanb", "ewma")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to rebuild a detector for a ``d``-dimensional stream.

    ``window`` is B. For NEWMA, ``big_lambda``/``small_lambda``/``m`` left as
    ``None`` are filled in by calibration; ``sigma`` left as ``None`` is
    set by the median trick on the first ``2B`` samples.
    """

    algo: str
    d: int
    window: int | None = None
    big_lambda: float | None = None
    small_lambda: float | None = None
    m: int | None = None
    sigma: float | None = None
    features: str = "rff"
    threshold: str = "adaptive:0.01,1.64"
    seed: int = 0
    n_blocks: int = 3

    def __post_init__(self) -> None:
        if self.algo not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algo!r}; choose from {ALGORITHMS}")
        if self.features not in ("rff", "fastfood", "identity"):
            raise ConfigurationError(f"unsupported feature map {self.features!r}")
        parse_threshold(self.threshold)

    @property
    def calibration_size(self) -> int:
        return 2 * self.resolved_window

    @property
    def resolved_window(self) -> int:
        if self.window is not None:
            return int(self.window)
        if self.big_lambda is not None and self.small_lambda is not None:
            return window_size(self.big_lambda, self.small_lambda)
        raise ConfigurationError("give --window or both forgetting factors")

    def needs_data(self) -> bool:
        return self.sigma is None and (self.features != "identity" or self.algo == "scanb")

    def to_dict(self) -> dict:
        return asdict(self)


def resolve(config: RunConfig, calibration_samples: np.ndarray | None = None) -> RunConfig:
    """Fill the unset hyperparameters; the result is fully explicit."""
    from dataclasses import replace

    B = config.resolved_window
    updates: dict = {"window": B}
    if config.needs_data():
        if calibration_samples is None:
            raise ConfigurationError("bandwidth not given and no calibration samples")
        updates["sigma"] = median_trick_bandwidth(calibration_samples, seed=derive_seed(config.seed, 1))
    if config.algo == "newma" and (config.big_lambda is None or config.small_lambda is None):
        cal = auto_calibrate(B)
        updates.update(big_lambda=cal.big_lambda, small_lambda=cal.small_lambda)
    big = updates.get("big_lambda", config.big_lambda)
    small = updates.get("small_lambda", config.small_lambda)
    if config.m is None and config.features != "identity":
        if big is None or small is None:
            cal = auto_calibrate(B)
            big, small = cal.big_lambda, cal.small_lambda
        m = choose_num_features(big, small)
        if config.features == "fastfood":
            dp = FeatureMapSpec("fastfood", config.d, m=1, sigma=1.0).padded_dim
            m = dp * math.ceil(m / dp)
        updates["m"] = m
    return replace(config, **updates)


def feature_spec(config: RunConfig) -> FeatureMapSpec:
    if config.features == "identity":
        return FeatureMapSpec("identity", config.d)
    return FeatureMapSpec(config.features, config.d, m=config.m, sigma=config.sigma, seed=derive_seed(config.seed, 0))


def build_detector(config: RunConfig) -> Detector:
    """Instantiate the detector of a resolved configuration."""
    threshold = parse_threshold(config.threshold)
    B = config.resolved_window
    if config.algo == "scanb":
        return ScanB(B, config.sigma, config.d, n_blocks=config.n_blocks, threshold=threshold)
    fmap = build_feature_map(feature_spec(config))
    if config.algo == "newma":
        return Newma(config.big_lambda, config.small_lambda, fmap, threshold)
    if config.algo == "sw":
        return SlidingWindow(B, fmap, threshold)
    raise ConfigurationError("ewma needs in-control moments; build it directly with newma.detectors.Ewma")


@dataclass
class Trace:
    """Column arrays of a finished run (statistic is NaN where not valid)."""

    stat: np.ndarray
    thresh: np.ndarray
    flag: np.ndarray
    armed: np.ndarray

    @property
    def flags(self) -> np.ndarray:
        return np.flatnonzero(self.flag) + 1

    @classmethod
    def from_results(cls, results: Iterable[StepResult]) -> "Trace":
        rows = [(r.statistic, r.threshold, r.flagged, r.armed) for r in results]
        if not rows:
            return cls(np.empty(0), np.empty(0), np.empty(0, bool), np.empty(0, bool))
        s, th, f, a = zip(*rows)
        return cls(np.array(s), np.array(th), np.array(f, bool), np.array(a, bool))

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "Trace":
        nan = math.nan
        rows = [
            (
                nan if r["stat"] is None else r["stat"],
                nan if r["thresh"] is None else r["thresh"],
                r["flag"],
                r["thresh"] is not None,
            )
            for r in records
        ]
        return cls.from_results(StepResult(0, s, th, f, True, a) for s, th, f, a in rows)


def run_config(config: RunConfig, samples: np.ndarray) -> tuple[RunConfig, Trace]:
    """Resolve ``config`` on the head of ``samples``, then run the whole stream."""
    B = config.resolved_window
    resolved = resolve(config, samples[: 2 * B] if config.needs_data() else None)
    det = build_detector(resolved)
    return resolved, Trace.from_results(iter_stream(det, samples))

