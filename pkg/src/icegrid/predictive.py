"""Storm-awareness modelling: horizon partition, preventive shed penalty,
forecast uncertainty envelope.

Once a storm forecast lands, the operating horizon splits into a pre-awareness
block T0 (business as usual, no load shedding), a preparation block TN of xi
steps immediately before storm onset (preventive shedding allowed at a
time-varying penalty), and the storm block TE. The preventive penalty decays
toward the emergency shedding price as the storm approaches: shedding early is
riskier because the forecast may still be wrong, so it is priced higher.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PenaltySchedule",
    "Horizon",
    "ForecastEnvelope",
    "partition_horizon",
]


@dataclass(frozen=True)
class PenaltySchedule:
    """Preventive load-shedding penalty  c(tau) = a^(b*tau) + c  in $/MWh.

    tau is whole hours remaining until storm onset. With the defaults
    (a = e, c = 1999) the penalty lands exactly on 2000 $/MWh at tau = 0,
    matching the emergency shedding price, and rises for earlier action.
    b = 0 makes the schedule flat.
    """

    a: float = math.e
    b: float = 0.1
    c: float = 1999.0

    def __post_init__(self) -> None:
        if not self.a > 1.0:
            raise ValueError(f"penalty base a must be > 1, got {self.a}")
        if self.b < 0.0:
            raise ValueError(f"penalty rate b must be >= 0, got {self.b}")
        if self.c < 0.0:
            raise ValueError(f"penalty floor c must be >= 0, got {self.c}")

    def penalty_at(self, tau: float) -> float:
        """Penalty for shedding tau hours before storm onset."""
        if tau < 0.0:
            raise ValueError(f"tau must be >= 0, got {tau}")
        return self.a ** (self.b * tau) + self.c


@dataclass(frozen=True)
class Horizon:
    """1-based step indexing over {1..total}; the storm occupies the tail.

    t0_steps: pre-awareness steps            {1 .. storm_start-xi-1}
    tn_steps: preparation steps              {storm_start-xi .. storm_start-1}
    te_steps: storm (emergency) steps        {storm_start .. total}

    The three blocks always partition {1..total}; the storm therefore must run
    to the end of the horizon.
    """

    total: int
    storm_start: int
    storm_end: int
    xi: int

    def __post_init__(self) -> None:
        if self.total < 1:
            raise ValueError(f"horizon must have at least one step, got {self.total}")
        if not (1 <= self.storm_start <= self.storm_end):
            raise ValueError(
                f"storm window [{self.storm_start}, {self.storm_end}] is malformed"
            )
        if self.storm_end > self.total:
            raise ValueError(
                f"storm window [{self.storm_start}, {self.storm_end}] lies outside "
                f"the {self.total}-step horizon"
            )
        if self.storm_end != self.total:
            raise ValueError(
                "storm must run to the end of the horizon "
                f"(storm_end={self.storm_end}, total={self.total}); the three "
                "operating blocks would not partition the horizon otherwise"
            )
        if self.xi < 0:
            raise ValueError(f"preparation window xi must be >= 0, got {self.xi}")
        if self.xi > self.storm_start - 1:
            raise ValueError(
                f"xi={self.xi} exceeds the {self.storm_start - 1} steps available "
                "before storm onset"
            )

    @property
    def t0_steps(self) -> range:
        return range(1, self.storm_start - self.xi)

    @property
    def tn_steps(self) -> range:
        return range(self.storm_start - self.xi, self.storm_start)

    @property
    def te_steps(self) -> range:
        return range(self.storm_start, self.storm_end + 1)

    @property
    def steps(self) -> range:
        return range(1, self.total + 1)

    def tau_of(self, t: int) -> int:
        """Hours remaining until storm onset from preparation step t."""
        if t not in self.tn_steps:
            raise ValueError(f"step {t} is not a preparation step")
        return self.storm_start - t

    def with_xi(self, xi: int) -> "Horizon":
        """Same storm window, different preparation length."""
        return Horizon(self.total, self.storm_start, self.storm_end, xi)


def partition_horizon(total: int, storm_start: int, storm_end: int, xi: int) -> Horizon:
    """Build and validate a horizon partition."""
    return Horizon(total=total, storm_start=storm_start, storm_end=storm_end, xi=xi)


@dataclass(frozen=True)
class ForecastEnvelope:
    """Per-step forecast of a storm quantity with a shrinking error band.

    mu[k], sigma[k] are indexed by lead step; sigma must be non-increasing
    (forecasts sharpen as the storm approaches). Used for reporting only.
    """

    mu: np.ndarray
    sigma: np.ndarray
    z: float = 1.96

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if mu.shape != sigma.shape or mu.ndim != 1 or mu.size == 0:
            raise ValueError("mu and sigma must be equal-length 1-D arrays")
        if np.any(sigma < 0.0):
            raise ValueError("sigma must be >= 0")
        if np.any(np.diff(sigma) > 1e-12):
            raise ValueError("sigma must be non-increasing as the storm approaches")
        if not self.z >= 0.0:
            raise ValueError(f"z must be >= 0, got {self.z}")

    def forecast_interval(self, k: int, z: float | None = None) -> tuple[float, float]:
        """Central interval [mu - z*sigma, mu + z*sigma] at lead index k."""
        if not (0 <= k < self.mu.size):
            raise ValueError(f"lead index {k} outside 0..{self.mu.size - 1}")
        zz = self.z if z is None else z
        half = zz * float(self.sigma[k])
        return float(self.mu[k]) - half, float(self.mu[k]) + half
