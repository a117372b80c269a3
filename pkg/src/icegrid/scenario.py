"""Hazard-driven scenario sampling with decision-dependent line damage.

Each scenario carries two damage trajectories per corridor: phi_o (status if
the corridor is NOT hardened) and phi_w (status if it IS hardened), both built
from the same underlying randomness so the planner's hardening decision never
"re-rolls" the storm. Per segment and storm step one shared uniform is drawn
and compared against the conditional failure hazard at the current accreted
thickness, evaluated at the design thickness R (unhardened) and at
hardening_factor * R (hardened). The hardened threshold is never larger, so a
hardened corridor can only be damaged at the very step the unhardened one
first fails, and it shares the same repair window. That makes dominance
phi_w <= phi_o hold path by path, repair tail included: a corridor is struck
by at most one damaging event per storm, and hardening decides whether the
event breaks it.

Randomness is organised as one independent stream per (seed, scenario id,
purpose) triple, so regenerating a set, changing thread counts, or appending
scenarios never disturbs existing draws.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .grid_model import Network, profile_series
from .hazard import (
    RepairDist,
    WeatherStep,
    WTFragility,
    accumulate_thickness,
    repair_time_sample,
    segment_failure_prob,
    wt_failure_prob,
)
from .predictive import Horizon

__all__ = [
    "ScenarioConfig",
    "StormSample",
    "Episode",
    "DamageSeries",
    "Scenario",
    "ScenarioSet",
    "conditional_hazards",
    "sample_storm",
    "sample_loads",
    "sample_damage_series",
    "compose_line_status",
    "generate_set",
    "save_scenario_set",
    "load_scenario_set",
    "scenario_set_to_doc",
    "scenario_set_from_doc",
]

# Purpose codes for per-scenario substreams.
_STREAM_STORM = 0
_STREAM_LOAD = 1
_STREAM_DAMAGE = 2
_STREAM_WIND = 3
_STREAM_REPAIR = 4


def _stream(seed: int, scenario_id: int, purpose: int) -> np.random.Generator:
    """Independent, reproducible substream for one scenario and purpose."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(scenario_id, purpose))
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Sampling knobs for storm weather, demand, and repair."""

    pr_mean: float = 8.0        # precipitation rate mean, mm/h
    pr_std: float = 2.0
    pr_ar1: float = 0.8         # hour-to-hour correlation
    wind_mean: float = 6.0      # wind speed mean, m/s
    wind_std: float = 2.0
    wind_ar1: float = 0.8
    intensity_low: float = 0.8  # per-corridor spatial factor bounds
    intensity_high: float = 1.2
    kappa_mean: float = 1.0     # demand multiplier
    kappa_std: float = 0.1
    kappa_low: float = 0.5
    kappa_high: float = 1.5
    repair_alpha: float = 4.0   # Weibull repair hours
    repair_beta: float = 10.0

    def __post_init__(self) -> None:
        if self.pr_std < 0 or self.wind_std < 0 or self.kappa_std < 0:
            raise ValueError("standard deviations must be >= 0")
        for name in ("pr_ar1", "wind_ar1"):
            rho = getattr(self, name)
            if not (0.0 <= rho < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {rho}")
        if not (0.0 <= self.intensity_low <= self.intensity_high):
            raise ValueError("intensity bounds must satisfy 0 <= low <= high")
        if not (self.kappa_low <= self.kappa_high):
            raise ValueError("kappa bounds must satisfy low <= high")

    @property
    def repair_dist(self) -> RepairDist:
        return RepairDist(self.repair_alpha, self.repair_beta)


@dataclass(frozen=True)
class StormSample:
    """One realised storm: per-step weather plus per-corridor intensity."""

    weather: tuple[WeatherStep, ...]
    intensity: dict[str, float]  # corridor id -> spatial factor >= 0

    def __post_init__(self) -> None:
        if any(v < 0.0 for v in self.intensity.values()):
            raise ValueError("intensity factors must be >= 0")


@dataclass(frozen=True)
class Episode:
    """A single outage window: `start` (1-based absolute step) and `length`."""

    start: int
    length: int

    def __post_init__(self) -> None:
        if self.start < 1 or self.length < 1:
            raise ValueError(f"bad episode [{self.start}, {self.length}]")

    @property
    def stop(self) -> int:
        """Last step (inclusive) of the outage."""
        return self.start + self.length - 1

    def covers(self, t: int) -> bool:
        return self.start <= t <= self.stop


def _episode_series(episode: Episode | None, total: int) -> np.ndarray:
    out = np.zeros(total, dtype=np.int8)
    if episode is not None:
        out[episode.start - 1: episode.stop] = 1
    return out


@dataclass(frozen=True)
class DamageSeries:
    """Decision-dependent damage for one scenario.

    phi_o / phi_w: corridor id -> outage episode without / with hardening.
    wind_out:      farm id -> icing outage episode (turbine unavailable).
    Each component suffers at most one episode; a hardened episode, when
    present, coincides with the unhardened one.
    """

    total_steps: int
    phi_o: dict[str, Episode | None]
    phi_w: dict[str, Episode | None]
    wind_out: dict[str, Episode | None]
    repair_hours: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for cid, ep_w in self.phi_w.items():
            ep_o = self.phi_o.get(cid)
            if ep_w is not None and ep_w != ep_o:
                raise ValueError(
                    f"corridor {cid}: hardened episode {ep_w} not nested in "
                    f"unhardened episode {ep_o}"
                )

    def phi_o_series(self, corridor_id: str) -> np.ndarray:
        return _episode_series(self.phi_o[corridor_id], self.total_steps)

    def phi_w_series(self, corridor_id: str) -> np.ndarray:
        return _episode_series(self.phi_w[corridor_id], self.total_steps)

    def gamma_series(self, farm_id: str) -> np.ndarray:
        """Turbine availability: 1 when in service."""
        return 1 - _episode_series(self.wind_out[farm_id], self.total_steps)

    def dominance_ok(self) -> bool:
        """phi_w <= phi_o at every step, for every corridor."""
        return all(
            np.all(self.phi_w_series(cid) <= self.phi_o_series(cid))
            for cid in self.phi_o
        )


@dataclass(frozen=True)
class Scenario:
    id: int
    probability: float
    kappa: dict[str, float]            # bus id -> demand multiplier
    load: dict[str, np.ndarray]        # bus id -> MW per step, full horizon
    wind: dict[str, np.ndarray]        # farm id -> available MW, full horizon
    damage: DamageSeries


@dataclass(frozen=True)
class ScenarioSet:
    meta: dict
    scenarios: tuple[Scenario, ...]

    def __post_init__(self) -> None:
        total_p = sum(s.probability for s in self.scenarios)
        if self.scenarios and abs(total_p - 1.0) > 1e-9:
            raise ValueError(f"scenario probabilities sum to {total_p}, not 1")

    def __len__(self) -> int:
        return len(self.scenarios)


# ----------------------------------------------------------------- sampling

def _ar1_series(rng: np.random.Generator, n: int, rho: float) -> np.ndarray:
    """Stationary AR(1) latent series with standard normal marginals."""
    eps = rng.standard_normal(n)
    out = np.empty(n)
    scale = np.sqrt(1.0 - rho * rho)
    for k in range(n):
        out[k] = eps[k] if k == 0 else rho * out[k - 1] + scale * eps[k]
    return out


def sample_storm(
    config: ScenarioConfig,
    rng: np.random.Generator,
    n_steps: int,
    corridor_ids: Sequence[str],
) -> StormSample:
    """Draw storm weather (AR(1)-correlated, floored at zero) and spatial
    intensity factors."""
    z_pr = _ar1_series(rng, n_steps, config.pr_ar1)
    z_v = _ar1_series(rng, n_steps, config.wind_ar1)
    pr = np.maximum(0.0, config.pr_mean + config.pr_std * z_pr)
    v = np.maximum(0.0, config.wind_mean + config.wind_std * z_v)
    weather = tuple(WeatherStep(float(p), float(w)) for p, w in zip(pr, v))
    intensity = {
        cid: float(rng.uniform(config.intensity_low, config.intensity_high))
        for cid in sorted(corridor_ids)
    }
    return StormSample(weather=weather, intensity=intensity)


def sample_loads(
    net: Network,
    config: ScenarioConfig,
    rng: np.random.Generator,
    total_steps: int,
) -> tuple[dict[str, float], dict[str, np.ndarray]]:
    """Per-bus demand multiplier kappa and the resulting MW series."""
    kappa: dict[str, float] = {}
    load: dict[str, np.ndarray] = {}
    for bus in sorted(net.buses, key=lambda b: b.id):
        k = float(np.clip(rng.normal(config.kappa_mean, config.kappa_std),
                          config.kappa_low, config.kappa_high))
        kappa[bus.id] = k
        load[bus.id] = k * profile_series(bus.load_profile, total_steps)
    return kappa, load


def conditional_hazards(cumulative_probs: np.ndarray) -> np.ndarray:
    """Per-step conditional failure hazard from a cumulative failure curve.

    h[t] = (F[t] - F[t-1]) / (1 - F[t-1]), so surviving every step up to t has
    probability exactly 1 - F[t].
    """
    f = np.asarray(cumulative_probs, dtype=float)
    if np.any((f < 0) | (f > 1)):
        raise ValueError("cumulative probabilities must lie in [0, 1]")
    if np.any(np.diff(f) < -1e-12):
        raise ValueError("cumulative probabilities must be non-decreasing")
    prev = np.concatenate(([0.0], f[:-1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(prev < 1.0, (f - prev) / (1.0 - prev), 1.0)
    return np.clip(h, 0.0, 1.0)


def _first_event(
    u: np.ndarray,
    hazard_unhardened: np.ndarray,
    hazard_hardened: np.ndarray,
) -> tuple[int | None, bool]:
    """First damaging event over shared uniforms u of shape (segments, steps).

    Returns (0-based step of the event or None, whether the hardened build
    is also broken by it). One event max: hardened failure can only coincide
    with the unhardened one.
    """
    if np.any(hazard_hardened > hazard_unhardened + 1e-12):
        raise RuntimeError("hazard ordering violated: hardened above unhardened")
    hit_o = u < hazard_unhardened[None, :]
    steps = np.flatnonzero(hit_o.any(axis=0))
    if steps.size == 0:
        return None, False
    k = int(steps[0])
    hardened_hit = bool((u[:, k] < hazard_hardened[k]).any())
    return k, hardened_hit


def sample_damage_series(
    net: Network,
    horizon: Horizon,
    storm: StormSample,
    config: ScenarioConfig,
    damage_rng: np.random.Generator,
    wind_rng: np.random.Generator,
    repair_rng: np.random.Generator,
) -> DamageSeries:
    """Component damage for one scenario.

    Corridors see the storm thickness scaled by their intensity factor; wind
    farms see the unscaled thickness. Repair draws are consumed for every
    component whether or not it fails, keeping streams aligned across
    scenarios that differ only in failure outcomes.
    """
    n_steps = len(storm.weather)
    if n_steps != len(horizon.te_steps):
        raise ValueError(
            f"storm has {n_steps} steps but the horizon's storm window has "
            f"{len(horizon.te_steps)}"
        )
    base_thickness = accumulate_thickness(storm.weather)
    repair = config.repair_dist

    phi_o: dict[str, Episode | None] = {}
    phi_w: dict[str, Episode | None] = {}
    wind_out: dict[str, Episode | None] = {}
    repair_hours: dict[str, int] = {}

    events: dict[str, tuple[int | None, bool]] = {}
    for corridor in sorted(net.corridors, key=lambda c: c.id):
        r = storm.intensity[corridor.id] * base_thickness
        f_o = segment_failure_prob(r, corridor.r_base_mm)
        f_w = segment_failure_prob(r, corridor.hardening_factor * corridor.r_base_mm)
        h_o = conditional_hazards(f_o)
        h_w = conditional_hazards(f_w)
        u = damage_rng.random((corridor.segments, n_steps))
        events[corridor.id] = _first_event(u, h_o, h_w)

    wind_events: dict[str, int | None] = {}
    for farm in sorted(net.wind_farms, key=lambda w: w.id):
        frag = WTFragility(alpha=farm.alpha_wt, beta=farm.beta_wt)
        f_wt = wt_failure_prob(base_thickness, frag)
        h_wt = conditional_hazards(np.asarray(f_wt))
        u = wind_rng.random((1, n_steps))
        step, _ = _first_event(u, h_wt, h_wt)
        wind_events[farm.id] = step

    # Repair draws in a fixed order: corridors, then farms, both sorted.
    for corridor in sorted(net.corridors, key=lambda c: c.id):
        hours = int(repair_time_sample(repair, float(repair_rng.random())))
        step, hardened_hit = events[corridor.id]
        if step is None:
            phi_o[corridor.id] = None
            phi_w[corridor.id] = None
            continue
        start = horizon.storm_start + step
        length = min(hours, horizon.total - start + 1)
        episode = Episode(start, length)
        phi_o[corridor.id] = episode
        phi_w[corridor.id] = episode if hardened_hit else None
        repair_hours[corridor.id] = hours
    for farm in sorted(net.wind_farms, key=lambda w: w.id):
        hours = int(repair_time_sample(repair, float(repair_rng.random())))
        step = wind_events[farm.id]
        if step is None:
            wind_out[farm.id] = None
            continue
        start = horizon.storm_start + step
        wind_out[farm.id] = Episode(start, min(hours, horizon.total - start + 1))
        repair_hours[farm.id] = hours

    return DamageSeries(
        total_steps=horizon.total,
        phi_o=phi_o,
        phi_w=phi_w,
        wind_out=wind_out,
        repair_hours=repair_hours,
    )


def _one_scenario(
    net: Network,
    horizon: Horizon,
    config: ScenarioConfig,
    seed: int,
    scenario_id: int,
    probability: float,
) -> Scenario:
    storm = sample_storm(
        config,
        _stream(seed, scenario_id, _STREAM_STORM),
        len(horizon.te_steps),
        [c.id for c in net.corridors],
    )
    kappa, load = sample_loads(
        net, config, _stream(seed, scenario_id, _STREAM_LOAD), horizon.total
    )
    damage = sample_damage_series(
        net, horizon, storm, config,
        _stream(seed, scenario_id, _STREAM_DAMAGE),
        _stream(seed, scenario_id, _STREAM_WIND),
        _stream(seed, scenario_id, _STREAM_REPAIR),
    )
    wind = {
        farm.id: profile_series(farm.profile, horizon.total)
        for farm in sorted(net.wind_farms, key=lambda w: w.id)
    }
    return Scenario(
        id=scenario_id,
        probability=probability,
        kappa=kappa,
        load=load,
        wind=wind,
        damage=damage,
    )


def _network_digest(net: Network) -> str:
    def plain(value):
        if isinstance(value, np.ndarray):
            return [float(x) for x in value]
        if isinstance(value, dict):
            return {k: plain(v) for k, v in sorted(value.items())}
        if isinstance(value, (list, tuple)):
            return [plain(v) for v in value]
        return value

    doc = {
        "base_mva": net.base_mva,
        "buses": [plain(asdict(b)) for b in net.buses],
        "corridors": [plain(asdict(c)) for c in net.corridors],
        "generators": [plain(asdict(g)) for g in net.generators],
        "wind_farms": [plain(asdict(w)) for w in net.wind_farms],
        "storage_sites": [plain(asdict(s)) for s in net.storage_sites],
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def config_hash(net: Network, horizon: Horizon, config: ScenarioConfig) -> str:
    doc = {
        "network": _network_digest(net),
        "horizon": {"total": horizon.total, "storm_start": horizon.storm_start,
                    "storm_end": horizon.storm_end},
        "config": asdict(config),
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def generate_set(
    net: Network,
    horizon: Horizon,
    config: ScenarioConfig,
    seed: int,
    count: int,
    threads: int = 1,
) -> ScenarioSet:
    """Sample `count` equiprobable scenarios. Thread count never changes the
    result: every scenario owns its substreams and results are assembled by
    scenario id."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    probability = 1.0 / count

    def build(sid: int) -> Scenario:
        return _one_scenario(net, horizon, config, seed, sid, probability)

    ids = list(range(count))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scenarios = list(pool.map(build, ids))
    else:
        scenarios = [build(sid) for sid in ids]
    scenarios.sort(key=lambda s: s.id)

    meta = {
        "version": 1,
        "seed": seed,
        "count": count,
        "config_hash": config_hash(net, horizon, config),
        "horizon": {
            "total": horizon.total,
            "storm_start": horizon.storm_start,
            "storm_end": horizon.storm_end,
        },
    }
    return ScenarioSet(meta=meta, scenarios=tuple(scenarios))


# ------------------------------------------------------------- composition

def compose_line_status(
    x: Mapping[str, int],
    damage: DamageSeries,
) -> dict[str, np.ndarray]:
    """Realised damage status mu = (1-x)*phi_o + x*phi_w per corridor.

    x maps corridor id to a binary hardening decision.
    """
    out: dict[str, np.ndarray] = {}
    for cid in damage.phi_o:
        decision = x.get(cid, 0)
        if decision not in (0, 1):
            raise ValueError(f"hardening decision for {cid} must be 0 or 1")
        series = damage.phi_w_series(cid) if decision else damage.phi_o_series(cid)
        out[cid] = series.astype(np.int8)
    return out


# ------------------------------------------------------------ persistence

def _episodes_doc(table: Mapping[str, Episode | None]) -> dict:
    return {
        key: ([[ep.start, ep.length]] if ep is not None else [])
        for key, ep in sorted(table.items())
    }

def _episodes_from_doc(doc: Mapping[str, list]) -> dict[str, Episode | None]:
    out: dict[str, Episode | None] = {}
    for key, eps in doc.items():
        if len(eps) > 1:
            raise ValueError(f"component {key}: more than one outage episode")
        out[key] = Episode(int(eps[0][0]), int(eps[0][1])) if eps else None
    return out


def scenario_set_to_doc(ss: ScenarioSet) -> dict:
    scenarios = []
    for s in ss.scenarios:
        scenarios.append({
            "id": s.id,
            "probability": s.probability,
            "kappa": {k: v for k, v in sorted(s.kappa.items())},
            "load": {k: [float(x) for x in v] for k, v in sorted(s.load.items())},
            "wind": {k: [float(x) for x in v] for k, v in sorted(s.wind.items())},
            "damage": {
                "total_steps": s.damage.total_steps,
                "phi_o": _episodes_doc(s.damage.phi_o),
                "phi_w": _episodes_doc(s.damage.phi_w),
                "wind_out": _episodes_doc(s.damage.wind_out),
                "repair_hours": {k: v for k, v in sorted(s.damage.repair_hours.items())},
            },
        })
    return {"meta": ss.meta, "scenarios": scenarios}


def scenario_set_from_doc(doc: Mapping) -> ScenarioSet:
    if set(doc) != {"meta", "scenarios"}:
        raise ValueError("scenario set document must have exactly meta and scenarios")
    scenarios = []
    for raw in doc["scenarios"]:
        dmg = raw["damage"]
        damage = DamageSeries(
            total_steps=int(dmg["total_steps"]),
            phi_o=_episodes_from_doc(dmg["phi_o"]),
            phi_w=_episodes_from_doc(dmg["phi_w"]),
            wind_out=_episodes_from_doc(dmg["wind_out"]),
            repair_hours={k: int(v) for k, v in dmg.get("repair_hours", {}).items()},
        )
        scenarios.append(Scenario(
            id=int(raw["id"]),
            probability=float(raw["probability"]),
            kappa={k: float(v) for k, v in raw["kappa"].items()},
            load={k: np.asarray(v, dtype=float) for k, v in raw["load"].items()},
            wind={k: np.asarray(v, dtype=float) for k, v in raw["wind"].items()},
            damage=damage,
        ))
    scenarios.sort(key=lambda s: s.id)
    return ScenarioSet(meta=dict(doc["meta"]), scenarios=tuple(scenarios))


def save_scenario_set(ss: ScenarioSet, path: str | Path) -> None:
    """Canonical serialisation: sorted keys, compact separators, one trailing
    newline. Identical inputs produce byte-identical files."""
    doc = scenario_set_to_doc(ss)
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_scenario_set(path: str | Path) -> ScenarioSet:
    return scenario_set_from_doc(json.loads(Path(path).read_text()))
