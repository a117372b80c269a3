"""Ice accretion, component fragility, and repair-time primitives.

Physics pipeline: hourly freezing-rain weather -> radial ice thickness on
conductors (flat-plate accretion with wind-driven impingement) -> segment and
corridor failure probabilities from a design-thickness fragility curve ->
wind-turbine availability from a log-logistic icing curve -> Weibull repair
durations for damaged components.

All thicknesses are radial-equivalent millimetres, precipitation rates mm/h,
wind speeds m/s, durations hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Ice and water densities in g/cm^3; the 3.6 factor converts the wind-borne
# liquid-water flux term (m/s * g/m^3) onto the same mm/h footing as
# precipitation.
ICE_DENSITY = 0.9
WATER_DENSITY = 1.0
FLUX_FACTOR = 3.6

# Fragility exponent: used as printed, not as ln(2).
FRAGILITY_EXPONENT = 0.6931
# Collapse is certain once accreted thickness reaches this multiple of the
# design thickness.
FRAGILITY_CEILING = 5.0

__all__ = [
    "ICE_DENSITY",
    "WATER_DENSITY",
    "FRAGILITY_EXPONENT",
    "FRAGILITY_CEILING",
    "WeatherStep",
    "WTFragility",
    "RepairDist",
    "liquid_water_content",
    "accretion_step",
    "accumulate_thickness",
    "segment_failure_prob",
    "corridor_failure_prob",
    "wt_failure_prob",
    "repair_time_sample",
    "repair_time_mean",
]


@dataclass(frozen=True)
class WeatherStep:
    """One time step of storm weather.

    precip_rate: freezing precipitation rate, mm/h (>= 0)
    wind_speed:  wind speed, m/s (>= 0)
    duration:    step length in hours (> 0)
    freezing:    whether surface conditions support accretion
    """

    precip_rate: float
    wind_speed: float
    duration: float = 1.0
    freezing: bool = True

    def __post_init__(self) -> None:
        if self.precip_rate < 0.0:
            raise ValueError(f"precip_rate must be >= 0, got {self.precip_rate}")
        if self.wind_speed < 0.0:
            raise ValueError(f"wind_speed must be >= 0, got {self.wind_speed}")
        if not self.duration > 0.0:
            raise ValueError(f"duration must be > 0, got {self.duration}")


@dataclass(frozen=True)
class WTFragility:
    """Log-logistic icing fragility for a wind turbine.

    Failure probability at thickness r is (r/alpha)^beta / (1 + (r/alpha)^beta).
    """

    alpha: float = 20.0  # mm, thickness at 50% failure probability
    beta: float = 4.0    # dimensionless shape

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class RepairDist:
    """Weibull repair duration (hours): scale alpha, shape beta."""

    alpha: float = 4.0
    beta: float = 10.0

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError(f"repair alpha must be > 0, got {self.alpha}")
        if not self.beta > 0.0:
            raise ValueError(f"repair beta must be > 0, got {self.beta}")


def liquid_water_content(precip_rate: float | np.ndarray) -> float | np.ndarray:
    """Airborne liquid water content (g/m^3) carried by wind at a given
    precipitation rate: 0.067 * Pr^0.846."""
    pr = np.asarray(precip_rate, dtype=float)
    if np.any(pr < 0.0):
        raise ValueError("precip_rate must be >= 0")
    out = 0.067 * pr**0.846
    return float(out) if np.isscalar(precip_rate) or out.ndim == 0 else out


def accretion_step(step: WeatherStep) -> float:
    """Radial ice thickness gained over one weather step, mm.

    Flat-plate accretion: the vertical flux Pr*rho_w and the horizontal flux
    3.6*v*L(Pr) add in quadrature, divided by ice density and pi. Non-freezing
    steps accrete nothing.
    """
    if not step.freezing:
        return 0.0
    lwc = liquid_water_content(step.precip_rate)
    vertical = step.precip_rate * WATER_DENSITY
    horizontal = FLUX_FACTOR * step.wind_speed * lwc
    return step.duration / (ICE_DENSITY * math.pi) * math.hypot(vertical, horizontal)


def accumulate_thickness(weather: Sequence[WeatherStep]) -> np.ndarray:
    """Cumulative radial thickness after each step (monotone non-decreasing)."""
    increments = np.array([accretion_step(w) for w in weather], dtype=float)
    return np.cumsum(increments)


def segment_failure_prob(thickness: float | np.ndarray, r_design: float) -> float | np.ndarray:
    """Probability a line segment with design thickness r_design has failed
    once accreted thickness reaches `thickness`.

    Zero below the design thickness, exp(0.6931*(r-R)/(4R)) - 1 up to 5R,
    certain at and beyond 5R. Clamped to [0, 1].
    """
    if not r_design > 0.0:
        raise ValueError(f"r_design must be > 0, got {r_design}")
    r = np.asarray(thickness, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("thickness must be >= 0")
    ramp = np.exp(FRAGILITY_EXPONENT * (r - r_design) / (4.0 * r_design)) - 1.0
    out = np.where(r < r_design, 0.0, np.where(r >= FRAGILITY_CEILING * r_design, 1.0, ramp))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def corridor_failure_prob(segment_probs: Sequence[float] | np.ndarray) -> float:
    """Corridor (series system) failure probability: 1 - prod(1 - p_l)."""
    probs = np.asarray(segment_probs, dtype=float)
    if probs.size == 0:
        raise ValueError("corridor needs at least one segment probability")
    if np.any((probs < 0.0) | (probs > 1.0)):
        raise ValueError("segment probabilities must lie in [0, 1]")
    return float(1.0 - np.prod(1.0 - probs))


def wt_failure_prob(thickness: float | np.ndarray, frag: WTFragility = WTFragility()) -> float | np.ndarray:
    """Wind turbine icing-outage probability at cumulative thickness (mm)."""
    r = np.asarray(thickness, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("thickness must be >= 0")
    ratio = (r / frag.alpha) ** frag.beta
    out = ratio / (1.0 + ratio)
    return float(out) if out.ndim == 0 else out


def repair_time_sample(
    dist: RepairDist,
    u: float | np.ndarray,
    whole_steps: bool = True,
) -> float | np.ndarray:
    """Repair duration by Weibull inverse-CDF: t = alpha * (-ln(1-u))^(1/beta).

    With whole_steps the duration is rounded up to an integral number of
    steps, never below one step.
    """
    uu = np.asarray(u, dtype=float)
    if np.any((uu < 0.0) | (uu >= 1.0)):
        raise ValueError("u must lie in [0, 1)")
    t = dist.alpha * (-np.log1p(-uu)) ** (1.0 / dist.beta)
    if whole_steps:
        t = np.maximum(np.ceil(t), 1.0)
    out = np.asarray(t)
    return float(out) if out.ndim == 0 else out


def repair_time_mean(dist: RepairDist) -> float:
    """Closed-form Weibull mean alpha * Gamma(1 + 1/beta)."""
    return dist.alpha * math.gamma(1.0 + 1.0 / dist.beta)
