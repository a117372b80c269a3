"""Transmission network data model and JSON ingestion.

The on-disk format is a single JSON object with keys `base_mva`, `buses`,
`corridors`, `generators`, `wind_farms`, `storage_sites`, and optionally
`profiles` (named MW series that buses and wind farms may reference). Unknown
keys anywhere are rejected so typos fail loudly. Component ids are coerced to
strings on ingest to keep them stable across JSON round trips.

Load and wind profiles accept three spellings:
  * an array of MW values (one per step; must cover the planning horizon),
  * the string "flat:<mw>" for a constant profile,
  * the name of an entry in the top-level `profiles` table.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "NetworkFormatError",
    "Bus",
    "Corridor",
    "Generator",
    "WindFarm",
    "StorageSite",
    "Network",
    "parse_network",
    "validate",
    "to_per_unit",
    "from_per_unit",
    "profile_series",
]

DEFAULT_BASE_MVA = 100.0
DEFAULT_HARDENING_FACTOR = 2.0
DEFAULT_HARDEN_COST_PER_MILE = 1.0e6
SEGMENT_MILES = 10.0

# Shedding caps by bus priority: (preventive alpha, emergency beta).
CRITICAL_SHED_CAPS = (0.10, 0.20)
NORMAL_SHED_CAPS = (0.20, 1.00)

# A profile is either a constant MW level or an explicit per-step series.
ProfileLike = Union[float, np.ndarray]


class NetworkFormatError(ValueError):
    """Raised when a network document is structurally invalid."""


@dataclass(frozen=True)
class Bus:
    id: str
    critical: bool = False
    load_profile: ProfileLike = 0.0
    alpha_shed: float | None = None  # preventive shed cap, fraction of load
    beta_shed: float | None = None   # emergency shed cap, fraction of load

    @property
    def alpha(self) -> float:
        if self.alpha_shed is not None:
            return self.alpha_shed
        return CRITICAL_SHED_CAPS[0] if self.critical else NORMAL_SHED_CAPS[0]

    @property
    def beta(self) -> float:
        if self.beta_shed is not None:
            return self.beta_shed
        return CRITICAL_SHED_CAPS[1] if self.critical else NORMAL_SHED_CAPS[1]


@dataclass(frozen=True)
class Corridor:
    id: str
    from_bus: str
    to_bus: str
    b_pu: float              # series susceptance magnitude, per unit
    pmax_mw: float           # thermal limit
    length_miles: float
    segments: int            # fragility segments along the corridor
    r_base_mm: float         # design ice thickness
    hardening_factor: float = DEFAULT_HARDENING_FACTOR
    hardening_cost: float = 0.0  # $ for hardening the whole corridor


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    pmax_mw: float
    pmin_mw: float = 0.0
    cost_per_mwh: float = 0.0


@dataclass(frozen=True)
class WindFarm:
    id: str
    bus: str
    capacity_mw: float
    profile: ProfileLike = 0.0
    alpha_wt: float = 20.0   # log-logistic fragility scale, mm
    beta_wt: float = 4.0     # log-logistic fragility shape


@dataclass(frozen=True)
class StorageSite:
    bus: str
    z_max_mwh: float         # energy sizing cap
    ep_ratio_h: float = 6.0  # energy-to-power ratio rho: P_max = Z / rho
    eta_charge: float = 0.9
    eta_discharge: float = 0.9
    energy_cost_per_kwh: float = 75.0
    power_cost_per_kw: float = 1300.0


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    corridors: tuple[Corridor, ...]
    generators: tuple[Generator, ...] = ()
    wind_farms: tuple[WindFarm, ...] = ()
    storage_sites: tuple[StorageSite, ...] = ()
    base_mva: float = DEFAULT_BASE_MVA
    per_unit: bool = False

    def bus(self, bus_id: str) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def corridor(self, corridor_id: str) -> Corridor:
        for c in self.corridors:
            if c.id == corridor_id:
                return c
        raise KeyError(corridor_id)

    @property
    def bus_ids(self) -> list[str]:
        return [b.id for b in self.buses]

    @property
    def corridor_ids(self) -> list[str]:
        return [c.id for c in self.corridors]


# --------------------------------------------------------------- profiles

def profile_series(profile: ProfileLike, total_steps: int) -> np.ndarray:
    """Materialise a profile over `total_steps` steps.

    Constant profiles expand to the horizon; explicit series must cover it
    and are truncated to its length.
    """
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if isinstance(profile, (int, float)):
        return np.full(total_steps, float(profile))
    series = np.asarray(profile, dtype=float)
    if series.size < total_steps:
        raise ValueError(
            f"profile has {series.size} steps but the horizon needs {total_steps}"
        )
    return series[:total_steps].copy()


def _parse_profile(
    value: Any,
    profiles: Mapping[str, np.ndarray],
    where: str,
) -> ProfileLike:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value < 0:
            raise NetworkFormatError(f"{where}: constant profile must be >= 0")
        return float(value)
    if isinstance(value, str):
        if value.startswith("flat:"):
            try:
                level = float(value[5:])
            except ValueError:
                raise NetworkFormatError(f"{where}: bad flat profile {value!r}") from None
            if level < 0:
                raise NetworkFormatError(f"{where}: constant profile must be >= 0")
            return level
        if value in profiles:
            return profiles[value].copy()
        raise NetworkFormatError(f"{where}: unknown profile reference {value!r}")
    if isinstance(value, list):
        series = np.asarray(value, dtype=float)
        if series.ndim != 1 or series.size == 0:
            raise NetworkFormatError(f"{where}: profile array must be 1-D and non-empty")
        if np.any(series < 0):
            raise NetworkFormatError(f"{where}: profile values must be >= 0")
        return series
    raise NetworkFormatError(f"{where}: profile must be a number, string, or array")


# ----------------------------------------------------------------- parsing

def _require_keys(obj: Mapping[str, Any], allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, Mapping):
        raise NetworkFormatError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise NetworkFormatError(f"{where}: unknown key {sorted(unknown)[0]!r}")
    missing = required - set(obj)
    if missing:
        raise NetworkFormatError(f"{where}: missing key {sorted(missing)[0]!r}")


def _as_id(value: Any, where: str) -> str:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise NetworkFormatError(f"{where}: id must be a string or integer")
    text = str(value)
    if not text:
        raise NetworkFormatError(f"{where}: id must be non-empty")
    return text


def _as_number(value: Any, where: str, minimum: float | None = None, strict: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise NetworkFormatError(f"{where}: expected a number")
    x = float(value)
    if minimum is not None:
        if strict and not x > minimum:
            raise NetworkFormatError(f"{where}: must be > {minimum}, got {x}")
        if not strict and x < minimum:
            raise NetworkFormatError(f"{where}: must be >= {minimum}, got {x}")
    return x


def _as_int(value: Any, where: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise NetworkFormatError(f"{where}: expected an integer")
    if value < minimum:
        raise NetworkFormatError(f"{where}: must be >= {minimum}, got {value}")
    return value


def parse_network(source: Union[str, Path, Mapping[str, Any]]) -> Network:
    """Parse and validate a network document (path, JSON text, or dict)."""
    if isinstance(source, Mapping):
        doc: Mapping[str, Any] = source
    else:
        text = str(source)
        if isinstance(source, Path) or not text.lstrip().startswith(("{", "[")):
            text = Path(source).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise NetworkFormatError(f"network document is not valid JSON: {exc}") from exc
        if not isinstance(doc, Mapping):
            raise NetworkFormatError("network document must be a JSON object")

    _require_keys(
        doc,
        allowed={"base_mva", "buses", "corridors", "generators", "wind_farms",
                 "storage_sites", "profiles"},
        required={"buses", "corridors"},
        where="network",
    )

    base_mva = _as_number(doc.get("base_mva", DEFAULT_BASE_MVA), "base_mva", 0.0, strict=True)

    profiles: dict[str, np.ndarray] = {}
    for name, raw in (doc.get("profiles") or {}).items():
        series = np.asarray(raw, dtype=float)
        if series.ndim != 1 or series.size == 0 or np.any(series < 0):
            raise NetworkFormatError(f"profiles[{name!r}]: must be a non-empty array of values >= 0")
        profiles[str(name)] = series

    buses: list[Bus] = []
    for k, raw in enumerate(doc["buses"]):
        where = f"buses[{k}]"
        _require_keys(raw, {"id", "critical", "load_profile", "alpha_shed", "beta_shed"},
                      {"id"}, where)
        bus_id = _as_id(raw["id"], where)
        critical = raw.get("critical", False)
        if not isinstance(critical, bool):
            raise NetworkFormatError(f"{where}: critical must be a boolean")
        load = _parse_profile(raw.get("load_profile", 0.0), profiles, f"{where}.load_profile")
        alpha = raw.get("alpha_shed")
        beta = raw.get("beta_shed")
        if alpha is not None:
            alpha = _as_number(alpha, f"{where}.alpha_shed", 0.0)
        if beta is not None:
            beta = _as_number(beta, f"{where}.beta_shed", 0.0)
        buses.append(Bus(bus_id, critical, load, alpha, beta))

    corridors: list[Corridor] = []
    for k, raw in enumerate(doc["corridors"]):
        where = f"corridors[{k}]"
        _require_keys(
            raw,
            {"id", "from", "to", "b_pu", "pmax_mw", "length_miles", "segments",
             "r_base_mm", "hardening_factor", "hardening_cost"},
            {"id", "from", "to", "b_pu", "pmax_mw", "length_miles", "r_base_mm"},
            where,
        )
        length = _as_number(raw["length_miles"], f"{where}.length_miles", 0.0, strict=True)
        segments = raw.get("segments")
        if segments is None:
            segments = max(1, math.ceil(length / SEGMENT_MILES))
        else:
            segments = _as_int(segments, f"{where}.segments", 1)
        cost = raw.get("hardening_cost")
        if cost is None:
            cost = DEFAULT_HARDEN_COST_PER_MILE * length
        else:
            cost = _as_number(cost, f"{where}.hardening_cost", 0.0)
        corridors.append(Corridor(
            id=_as_id(raw["id"], where),
            from_bus=_as_id(raw["from"], f"{where}.from"),
            to_bus=_as_id(raw["to"], f"{where}.to"),
            b_pu=_as_number(raw["b_pu"], f"{where}.b_pu", 0.0, strict=True),
            pmax_mw=_as_number(raw["pmax_mw"], f"{where}.pmax_mw", 0.0, strict=True),
            length_miles=length,
            segments=segments,
            r_base_mm=_as_number(raw["r_base_mm"], f"{where}.r_base_mm", 0.0, strict=True),
            hardening_factor=_as_number(raw.get("hardening_factor", DEFAULT_HARDENING_FACTOR),
                                        f"{where}.hardening_factor", 1.0, strict=True),
            hardening_cost=cost,
        ))

    generators: list[Generator] = []
    for k, raw in enumerate(doc.get("generators", [])):
        where = f"generators[{k}]"
        _require_keys(raw, {"id", "bus", "pmax_mw", "pmin_mw", "cost_per_mwh"},
                      {"id", "bus", "pmax_mw", "cost_per_mwh"}, where)
        generators.append(Generator(
            id=_as_id(raw["id"], where),
            bus=_as_id(raw["bus"], f"{where}.bus"),
            pmax_mw=_as_number(raw["pmax_mw"], f"{where}.pmax_mw", 0.0, strict=True),
            pmin_mw=_as_number(raw.get("pmin_mw", 0.0), f"{where}.pmin_mw", 0.0),
            cost_per_mwh=_as_number(raw["cost_per_mwh"], f"{where}.cost_per_mwh", 0.0),
        ))

    wind_farms: list[WindFarm] = []
    for k, raw in enumerate(doc.get("wind_farms", [])):
        where = f"wind_farms[{k}]"
        _require_keys(raw, {"id", "bus", "capacity_mw", "profile", "alpha_wt", "beta_wt"},
                      {"id", "bus", "capacity_mw"}, where)
        wind_farms.append(WindFarm(
            id=_as_id(raw["id"], where),
            bus=_as_id(raw["bus"], f"{where}.bus"),
            capacity_mw=_as_number(raw["capacity_mw"], f"{where}.capacity_mw", 0.0, strict=True),
            profile=_parse_profile(raw.get("profile", 0.0), profiles, f"{where}.profile"),
            alpha_wt=_as_number(raw.get("alpha_wt", 20.0), f"{where}.alpha_wt", 0.0, strict=True),
            beta_wt=_as_number(raw.get("beta_wt", 4.0), f"{where}.beta_wt", 0.0, strict=True),
        ))

    storage_sites: list[StorageSite] = []
    for k, raw in enumerate(doc.get("storage_sites", [])):
        where = f"storage_sites[{k}]"
        _require_keys(
            raw,
            {"bus", "z_max_mwh", "ep_ratio_h", "eta_charge", "eta_discharge",
             "energy_cost_per_kwh", "power_cost_per_kw"},
            {"bus", "z_max_mwh"},
            where,
        )
        storage_sites.append(StorageSite(
            bus=_as_id(raw["bus"], f"{where}.bus"),
            z_max_mwh=_as_number(raw["z_max_mwh"], f"{where}.z_max_mwh", 0.0, strict=True),
            ep_ratio_h=_as_number(raw.get("ep_ratio_h", 6.0), f"{where}.ep_ratio_h", 0.0, strict=True),
            eta_charge=_as_number(raw.get("eta_charge", 0.9), f"{where}.eta_charge", 0.0, strict=True),
            eta_discharge=_as_number(raw.get("eta_discharge", 0.9), f"{where}.eta_discharge", 0.0, strict=True),
            energy_cost_per_kwh=_as_number(raw.get("energy_cost_per_kwh", 75.0),
                                           f"{where}.energy_cost_per_kwh", 0.0),
            power_cost_per_kw=_as_number(raw.get("power_cost_per_kw", 1300.0),
                                         f"{where}.power_cost_per_kw", 0.0),
        ))

    net = Network(
        buses=tuple(buses),
        corridors=tuple(corridors),
        generators=tuple(generators),
        wind_farms=tuple(wind_farms),
        storage_sites=tuple(storage_sites),
        base_mva=base_mva,
    )
    problems = validate(net)
    if problems:
        raise NetworkFormatError("; ".join(problems))
    return net


# -------------------------------------------------------------- validation

def validate(net: Network) -> list[str]:
    """Semantic checks; returns human-readable violations (empty when clean)."""
    problems: list[str] = []

    if not net.buses:
        problems.append("network has no buses")
        return problems

    bus_ids = [b.id for b in net.buses]
    if len(set(bus_ids)) != len(bus_ids):
        problems.append("duplicate bus ids")
    known = set(bus_ids)

    for b in net.buses:
        if not (0.0 <= b.alpha <= 1.0):
            problems.append(f"bus {b.id}: alpha_shed {b.alpha} outside [0, 1]")
        if not (0.0 <= b.beta <= 1.0):
            problems.append(f"bus {b.id}: beta_shed {b.beta} outside [0, 1]")
        if isinstance(b.load_profile, np.ndarray) and np.any(b.load_profile < 0):
            problems.append(f"bus {b.id}: negative load values")

    corridor_ids = [c.id for c in net.corridors]
    if len(set(corridor_ids)) != len(corridor_ids):
        problems.append("duplicate corridor ids")
    for c in net.corridors:
        if c.from_bus not in known:
            problems.append(f"corridor {c.id}: unknown bus {c.from_bus!r}")
        if c.to_bus not in known:
            problems.append(f"corridor {c.id}: unknown bus {c.to_bus!r}")
        if c.from_bus == c.to_bus:
            problems.append(f"corridor {c.id}: connects bus {c.from_bus!r} to itself")
        if c.segments < 1:
            problems.append(f"corridor {c.id}: needs at least one segment")
        if not c.hardening_factor > 1.0:
            problems.append(f"corridor {c.id}: hardening_factor must be > 1")
        if c.hardening_cost < 0.0:
            problems.append(f"corridor {c.id}: negative hardening cost")

    gen_ids = [g.id for g in net.generators]
    if len(set(gen_ids)) != len(gen_ids):
        problems.append("duplicate generator ids")
    for g in net.generators:
        if g.bus not in known:
            problems.append(f"generator {g.id}: unknown bus {g.bus!r}")
        if g.pmin_mw > g.pmax_mw:
            problems.append(f"generator {g.id}: pmin {g.pmin_mw} exceeds pmax {g.pmax_mw}")

    farm_ids = [w.id for w in net.wind_farms]
    if len(set(farm_ids)) != len(farm_ids):
        problems.append("duplicate wind farm ids")
    for w in net.wind_farms:
        if w.bus not in known:
            problems.append(f"wind farm {w.id}: unknown bus {w.bus!r}")
        cap = w.capacity_mw
        if isinstance(w.profile, np.ndarray):
            if np.any(w.profile > cap + 1e-9):
                problems.append(f"wind farm {w.id}: profile exceeds capacity {cap}")
        elif w.profile > cap + 1e-9:
            problems.append(f"wind farm {w.id}: profile exceeds capacity {cap}")

    site_buses = [s.bus for s in net.storage_sites]
    if len(set(site_buses)) != len(site_buses):
        problems.append("multiple storage sites on one bus")
    for s in net.storage_sites:
        if s.bus not in known:
            problems.append(f"storage site at unknown bus {s.bus!r}")
        for name in ("eta_charge", "eta_discharge"):
            eta = getattr(s, name)
            if not (0.0 < eta <= 1.0):
                problems.append(f"storage at {s.bus}: {name} {eta} outside (0, 1]")

    # Connectivity over all corridors (the intact network must be one island).
    if net.corridors and not problems:
        adjacency: dict[str, set[str]] = {b: set() for b in known}
        for c in net.corridors:
            adjacency[c.from_bus].add(c.to_bus)
            adjacency[c.to_bus].add(c.from_bus)
        seen = {bus_ids[0]}
        stack = [bus_ids[0]]
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if seen != known:
            missing = sorted(known - seen)
            problems.append(f"network is disconnected: unreachable buses {missing}")

    return problems


# ---------------------------------------------------------------- per unit

def _scale_profile(profile: ProfileLike, factor: float) -> ProfileLike:
    if isinstance(profile, np.ndarray):
        return profile * factor
    return profile * factor


def _convert(net: Network, factor: float, per_unit: bool) -> Network:
    buses = tuple(replace(b, load_profile=_scale_profile(b.load_profile, factor))
                  for b in net.buses)
    corridors = tuple(replace(c, pmax_mw=c.pmax_mw * factor) for c in net.corridors)
    generators = tuple(replace(g, pmax_mw=g.pmax_mw * factor, pmin_mw=g.pmin_mw * factor)
                       for g in net.generators)
    wind_farms = tuple(replace(w, capacity_mw=w.capacity_mw * factor,
                               profile=_scale_profile(w.profile, factor))
                       for w in net.wind_farms)
    storage_sites = tuple(replace(s, z_max_mwh=s.z_max_mwh * factor)
                          for s in net.storage_sites)
    return Network(buses, corridors, generators, wind_farms, storage_sites,
                   base_mva=net.base_mva, per_unit=per_unit)


def to_per_unit(net: Network) -> Network:
    """Divide every MW/MWh quantity by the MVA base. Susceptances stay pu."""
    if net.per_unit:
        return net
    return _convert(net, 1.0 / net.base_mva, per_unit=True)


def from_per_unit(net: Network) -> Network:
    """Inverse of to_per_unit."""
    if not net.per_unit:
        return net
    return _convert(net, net.base_mva, per_unit=False)
