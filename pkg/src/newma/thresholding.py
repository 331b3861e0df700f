"""Fixed and adaptive alarm thresholds.

Threshold objects are immutable descriptions; detectors call :meth:`start`
to obtain the mutable per-run state. The adaptive rule tracks exponentially
weighted estimates of the first two moments of ``S_t^2`` and flags when

    S_t^2 >= mu_t + a * sigma_t,

treating ``S_t^2`` as roughly Gaussian (``a = 1.64`` for a 5% tail).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError

# relative slack on the squared threshold; stops an exactly constant statistic
# from flagging at its own fixed point
ADAPTIVE_MARGIN = 1e-9

DEFAULT_ALPHA = 0.01
DEFAULT_A = 1.64


def fixed_step(tau: float, statistic: float, armed: bool = True) -> bool:
    return armed and statistic >= tau


@dataclass(frozen=True)
class FixedThreshold:
    tau: float

    def __post_init__(self) -> None:
        if not self.tau >= 0:
            raise ConfigurationError(f"fixed threshold must be >= 0, got {self.tau}")

    def start(self, warmup: int = 0) -> "FixedThresholdState":
        return FixedThresholdState(self.tau)

    def describe(self) -> str:
        return f"fixed:{self.tau!r}"


class FixedThresholdState:
    def __init__(self, tau: float):
        self.tau = float(tau)

    armed = True

    def update(self, statistic: float) -> tuple[float, bool]:
        return self.tau, fixed_step(self.tau, statistic)


@dataclass(frozen=True)
class AdaptiveThreshold:
    """Online threshold ``tau_t^2 = mu_t + a sigma_t``.

    No flag is raised before the ``warmup``-th update; ``None`` lets the
    detector choose (twice its window size).
    """

    alpha: float = DEFAULT_ALPHA
    a: float = DEFAULT_A
    warmup: int | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise ConfigurationError(f"learning rate alpha must lie in (0, 1), got {self.alpha}")
        if self.warmup is not None and self.warmup < 0:
            raise ConfigurationError("warmup must be >= 0")

    def start(self, warmup: int = 0) -> "ThresholdState":
        return ThresholdState(self.alpha, self.a, warmup if self.warmup is None else self.warmup)

    def describe(self) -> str:
        return f"adaptive:{self.alpha!r},{self.a!r}"


class ThresholdState:
    """Running moment estimates of the squared statistic.

    ``mu`` and ``mu2`` start at zero and are updated on every call, flagged
    or not, so the threshold inflates for a while after a change.
    """

    def __init__(self, alpha: float, a: float, warmup: int = 0):
        self.alpha = float(alpha)
        self.a = float(a)
        self.mu = 0.0
        self.mu2 = 0.0
        self.sigma = 0.0
        self.warmup = int(warmup)
        self.n_updates = 0

    @property
    def armed(self) -> bool:
        return self.n_updates >= self.warmup

    @property
    def warmup_remaining(self) -> int:
        return max(self.warmup - self.n_updates - 1, 0)

    def squared_threshold(self) -> float:
        return self.mu + self.a * self.sigma

    def update(self, statistic: float) -> tuple[float, bool]:
        s2 = statistic * statistic
        self.mu = (1 - self.alpha) * self.mu + self.alpha * s2
        self.mu2 = (1 - self.alpha) * self.mu2 + self.alpha * s2 * s2
        self.sigma = math.sqrt(max(self.mu2 - self.mu * self.mu, 0.0))
        level = self.squared_threshold()
        tau = math.sqrt(max(level, 0.0))
        self.n_updates += 1
        flagged = self.armed and s2 >= level + ADAPTIVE_MARGIN * abs(level)
        return tau, flagged


def adaptive_step(state: ThresholdState, statistic: float) -> tuple[float, bool]:
    return state.update(statistic)


def parse_threshold(text: str) -> FixedThreshold | AdaptiveThreshold:
    """Parse ``fixed:<tau>`` or ``adaptive:<alpha>,<a>``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "fixed":
            return FixedThreshold(float(rest))
        if kind == "adaptive":
            if not rest:
                return AdaptiveThreshold()
            alpha, a = (float(v) for v in rest.split(","))
            return AdaptiveThreshold(alpha, a)
    except ValueError as exc:
        raise ConfigurationError(f"bad threshold {text!r}: {exc}") from None
    raise ConfigurationError(f"bad threshold {text!r}; expected fixed:<tau> or adaptive:<alpha>,<a>")
