"""Scoring of alarm sequences against known change points, and step timing.

Around each true change ``c`` (segment length ``n``):

* every flag in ``(c - n/2, c]`` is a false alarm,
* the first flag in ``(c, c + n/2]`` is the detection, its delay is the
  flag time minus ``c``; no flag there is a missed detection,
* later flags in the same post-window are ignored, and flags outside every
  window are tallied separately as out-of-window alarms.

Step indices are 1-based: ``t = c + 1`` is the first sample after the change.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, InputError


@dataclass(frozen=True)
class ChangeRecord:
    change: int
    false_alarms: int
    delay: int | None

    @property
    def detected(self) -> bool:
        return self.delay is not None


@dataclass(frozen=True)
class EvalReport:
    n_changes: int
    false_alarms: int
    missed: int
    edd: float | None
    ignored: int = 0
    out_of_window: int = 0
    records: tuple[ChangeRecord, ...] = field(default=(), repr=False)

    @property
    def detected(self) -> int:
        return self.n_changes - self.missed

    @property
    def fa_per_change(self) -> float:
        return self.false_alarms / self.n_changes if self.n_changes else math.nan

    @property
    def missed_rate(self) -> float:
        return self.missed / self.n_changes if self.n_changes else math.nan

    def to_dict(self, with_records: bool = True) -> dict:
        out = {
            "n_changes": self.n_changes,
            "false_alarms": self.false_alarms,
            "fa_per_change": self.fa_per_change,
            "missed": self.missed,
            "missed_rate": self.missed_rate,
            "detected": self.detected,
            "edd": self.edd,
            "ignored": self.ignored,
            "out_of_window": self.out_of_window,
        }
        if with_records:
            out["records"] = [asdict(r) for r in self.records]
        return out


def _check_sorted(values: Sequence[int], name: str, strict: bool) -> None:
    diffs = np.diff(np.asarray(values))
    if (diffs <= 0).any() if strict else (diffs < 0).any():
        raise InputError(f"{name} must be {'strictly ' if strict else ''}increasing")


def score(flags: Sequence[int], change_points: Sequence[int], n: int) -> EvalReport:
    """Classify every flag relative to the change points and summarize."""
    if n < 1:
        raise ConfigurationError("segment length n must be >= 1")
    flags = np.asarray(flags, dtype=np.int64)
    cps = np.asarray(change_points, dtype=np.int64)
    _check_sorted(flags, "flags", strict=False)
    _check_sorted(cps, "change points", strict=True)
    if cps.size > 1 and np.diff(cps).min() < n:
        raise ConfigurationError(f"change points closer than n={n}: evaluation windows would overlap")
    half = n / 2.0
    records = []
    claimed = 0
    for c in cps:
        pre_lo = np.searchsorted(flags, c - half, side="right")  # first flag > c - n/2
        pre_hi = np.searchsorted(flags, c, side="right")  # first flag > c
        post_hi = np.searchsorted(flags, c + half, side="right")
        fa = int(pre_hi - pre_lo)
        in_post = int(post_hi - pre_hi)
        delay = int(flags[pre_hi] - c) if in_post else None
        claimed += fa + in_post
        records.append(ChangeRecord(int(c), fa, delay))
    delays = [r.delay for r in records if r.delay is not None]
    n_detected = len(delays)
    return EvalReport(
        n_changes=int(cps.size),
        false_alarms=sum(r.false_alarms for r in records),
        missed=int(cps.size) - n_detected,
        edd=float(np.mean(delays)) if delays else None,
        ignored=claimed - sum(r.false_alarms for r in records) - n_detected,
        out_of_window=int(flags.size) - claimed,
        records=tuple(records),
    )


def flags_from_trace(statistics_: np.ndarray, tau: float, eligible: np.ndarray | None = None) -> np.ndarray:
    """1-based steps where ``S_t >= tau`` among eligible (armed, valid) steps."""
    s = np.asarray(statistics_, dtype=float)
    hit = s >= tau  # NaN compares false
    if eligible is not None:
        hit &= np.asarray(eligible, dtype=bool)
    return np.flatnonzero(hit) + 1


def sweep_thresholds(
    statistics_: np.ndarray,
    change_points: Sequence[int],
    n: int,
    taus: Iterable[float],
    eligible: np.ndarray | None = None,
) -> list[tuple[float, EvalReport]]:
    """Re-score a stored statistic trace under a grid of fixed thresholds.

    ``eligible`` marks steps where a flag may be raised (the detector's
    warm-up is respected by passing its ``armed`` column).
    """
    return [(float(tau), score(flags_from_trace(statistics_, tau, eligible), change_points, n)) for tau in taus]


def dominates(a: EvalReport, b: EvalReport) -> bool:
    """True when ``a`` has strictly fewer false alarms, misses and delay than ``b``."""
    if a.edd is None or b.edd is None:
        return False
    return a.false_alarms < b.false_alarms and a.missed < b.missed and a.edd < b.edd


def tradeoff_rows(sweep: Sequence[tuple[float, EvalReport]]) -> list[dict]:
    return [
        {"tau": tau, "fa_per_change": r.fa_per_change, "missed_rate": r.missed_rate, "edd": r.edd}
        for tau, r in sweep
    ]


@dataclass(frozen=True)
class TimingCell:
    algo: str
    d: int
    B: int
    median_step_seconds: float
    repeats: int
    n_steps: int


def time_steps(make_detector: Callable[[], object], samples: np.ndarray, warmup: int = 0) -> float:
    """Median wall time of ``detector.step`` over ``samples[warmup:]``.

    The first ``warmup`` samples are fed untimed so that buffers are full.
    """
    det = make_detector()
    for x in samples[:warmup]:
        det.step(x)
    times = np.empty(len(samples) - warmup)
    clock = time.perf_counter
    for i, x in enumerate(samples[warmup:]):
        t0 = clock()
        det.step(x)
        times[i] = clock() - t0
    return float(np.median(times))


def benchmark_runtime(
    factories: dict[str, Callable[[int, int], object]],
    d_grid: Sequence[int],
    B_grid: Sequence[int],
    n_steps: int,
    repeats: int = 3,
    seed: int = 0,
    warmup: Callable[[str, int], int] | None = None,
) -> list[TimingCell]:
    """Per-step median time for every ``(algo, d, B)`` cell.

    ``factories[algo](d, B)`` builds a fresh detector. Each cell is timed
    ``repeats`` times on the same stream and the median of the per-run
    medians is reported. Stream generation happens before the clock starts.
    """
    if repeats < 3:
        raise ConfigurationError("need at least 3 repetitions")
    rng = np.random.default_rng(seed)
    cells = []
    for d in d_grid:
        samples = rng.standard_normal((n_steps, d))
        for algo, factory in factories.items():
            for B in B_grid:
                skip = 0 if warmup is None else min(warmup(algo, B), n_steps - 1)
                runs = [time_steps(lambda: factory(d, B), samples, skip) for _ in range(repeats)]
                cells.append(TimingCell(algo, d, B, statistics.median(runs), repeats, n_steps))
    return cells
