"""Learning-rate schedules: deterministic with divergence/summability checks,
and the adaptive rule eta_t = alpha / (beta + sum of past squared gradient
norms)^(1/2 + epsilon).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidHyperparameters


@dataclass(frozen=True)
class PowerLawSchedule:
    """gamma_t = min(1, c / (t+1)^p); the clamp touches finitely many terms."""

    c: float
    p: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be > 0")

    def gamma(self, t: int) -> float:
        return min(1.0, self.c / (t + 1.0) ** self.p)

    def max_gamma(self) -> float:
        # gamma is nonincreasing for p >= 0; for p < 0 it is unbounded but
        # clamped at 1, so the max over t is still gamma at the clamp.
        return self.gamma(0) if self.p >= 0 else 1.0


@dataclass(frozen=True)
class ExplicitSchedule:
    """Finite list of rates; only usable up to its own horizon."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("need at least one rate")
        if any(not 0 < v <= 1 for v in vals):
            raise ValueError("every rate must satisfy 0 < gamma <= 1")
        object.__setattr__(self, "values", vals)

    def gamma(self, t: int) -> float:
        if t >= len(self.values):
            raise IndexError(f"schedule has {len(self.values)} rates, t={t} requested")
        return self.values[t]

    def max_gamma(self) -> float:
        return max(self.values)


@dataclass(frozen=True)
class ScheduleCheck:
    valid: bool
    reason: str


def validate_robbins_monro(schedule) -> ScheduleCheck:
    """Whether sum gamma_t diverges while sum gamma_t^2 converges.

    Power law: valid exactly for 1/2 < p <= 1 (p-series test; the clamp to 1
    changes finitely many terms and does not affect either series).  Explicit
    lists are finite, so the divergence requirement can never hold.
    """
    if isinstance(schedule, PowerLawSchedule):
        p = schedule.p
        if 2 * p <= 1:
            return ScheduleCheck(False, f"sum of squares diverges: 2p = {2 * p:g} <= 1")
        if p > 1:
            return ScheduleCheck(False, f"rate sum converges: p = {p:g} > 1")
        return ScheduleCheck(True, f"p = {p:g} in (1/2, 1]")
    if isinstance(schedule, ExplicitSchedule):
        return ScheduleCheck(False, "finite horizon only: a finite rate sum cannot diverge")
    raise TypeError(f"unsupported schedule type {type(schedule).__name__}")


def sum_of_squares(schedule, terms: int = 10**6) -> float:
    """Upper bound on sigma = sum_t gamma_t^2, tight to ~1e-9 for power laws.

    Computed as an exact partial sum over ``terms`` entries plus an integral
    tail bound; requires a square-summable schedule.
    """
    if isinstance(schedule, ExplicitSchedule):
        return float(np.sum(np.asarray(schedule.values) ** 2))
    if not isinstance(schedule, PowerLawSchedule):
        raise TypeError(f"unsupported schedule type {type(schedule).__name__}")
    if 2 * schedule.p <= 1:
        raise ValueError("sum of squares diverges for 2p <= 1")
    t = np.arange(terms, dtype=float)
    partial = float(np.sum(np.minimum(1.0, schedule.c / (t + 1.0) ** schedule.p) ** 2))
    # sum_{t >= M} (t+1)^{-2p} <= integral_{M-1}^{inf} (x+1)^{-2p} dx
    tail = schedule.c**2 * float(terms) ** (1.0 - 2.0 * schedule.p) / (2.0 * schedule.p - 1.0)
    return partial + tail


def cumulative_squares(schedule, horizon: int) -> np.ndarray:
    """Partial sums: entry t holds sum_{j < t} gamma_j^2, for t = 0 .. horizon."""
    g = np.array([schedule.gamma(t) for t in range(horizon)], dtype=float)
    out = np.zeros(horizon + 1)
    np.cumsum(g * g, out=out[1:])
    return out


@dataclass(frozen=True)
class AdaptiveRate:
    """Hyperparameters of the adaptive rule; validated at construction."""

    alpha: float = 0.5
    beta: float = 1.0
    epsilon: float = 0.25

    def __post_init__(self):
        if not 0 < self.epsilon <= 0.5:
            raise InvalidHyperparameters(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        if not self.alpha > 0 or not self.beta > 0:
            raise InvalidHyperparameters("alpha and beta must be > 0")
        if self.alpha > self.beta ** (0.5 + self.epsilon):
            raise InvalidHyperparameters(
                f"need alpha <= beta^(1/2+eps): {self.alpha} > {self.beta ** (0.5 + self.epsilon)}"
            )

    @property
    def exponent(self) -> float:
        return 0.5 + self.epsilon

    def eta0(self) -> float:
        return float(self.alpha / self.beta**self.exponent)

    def square_sum_bound(self) -> float:
        """Deterministic bound on sum_t eta_{t+1}^2 ||h_t||^2 over any run."""
        return float(self.alpha**2 / (2.0 * self.epsilon * self.beta ** (2.0 * self.epsilon)))


class AdaptiveState:
    """Running accumulator of squared gradient norms for one trajectory.

    The sum uses compensated (Kahan) addition: runs accumulate 1e5+ small
    squares and plain summation would lose them.  Single-owner, sequential.
    """

    def __init__(self, rate: AdaptiveRate):
        self.rate = rate
        self._sum = np.float64(0.0)
        self._comp = np.float64(0.0)

    @property
    def accumulated(self) -> float:
        return float(self._sum)

    def eta(self) -> float:
        return float(self.rate.alpha / np.power(self.rate.beta + self._sum, self.rate.exponent))

    def update(self, grad_norm_sq: float) -> "AdaptiveState":
        if grad_norm_sq < 0:
            raise ValueError("squared norm must be >= 0")
        g = np.float64(grad_norm_sq)
        y = g - self._comp
        t = self._sum + y
        self._comp = (t - self._sum) - y
        self._sum = t
        return self
