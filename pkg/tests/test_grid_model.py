"""Network model tests: parsing, strict schema, defaults, validation,
per-unit round trip."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from icegrid.grid_model import (
    Network,
    NetworkFormatError,
    from_per_unit,
    parse_network,
    profile_series,
    to_per_unit,
    validate,
)


def minimal_doc() -> dict:
    return {
        "buses": [
            {"id": 1},
            {"id": 2, "critical": True, "load_profile": "flat:50"},
        ],
        "corridors": [
            {"id": "c12", "from": 1, "to": 2, "b_pu": 5.0, "pmax_mw": 100,
             "length_miles": 25, "r_base_mm": 10.0},
        ],
        "generators": [
            {"id": "g1", "bus": 1, "pmax_mw": 80, "cost_per_mwh": 25},
        ],
    }


# ----------------------------------------------------------------- parsing

def test_parse_minimal_network_defaults():
    net = parse_network(minimal_doc())
    assert net.base_mva == 100.0
    assert net.bus_ids == ["1", "2"]          # ids coerced to strings
    c = net.corridors[0]
    assert c.segments == math.ceil(25 / 10.0)  # 3
    assert c.hardening_factor == 2.0
    assert c.hardening_cost == pytest.approx(25 * 1.0e6)
    assert net.generators[0].pmin_mw == 0.0


def test_parse_bundled_fixture(net6_path):
    net = parse_network(net6_path)
    assert len(net.buses) == 6
    assert len(net.corridors) == 7
    assert len(net.storage_sites) == 2
    assert validate(net) == []
    # Named profile reference resolved to an array.
    w = net.wind_farms[0]
    assert isinstance(w.profile, np.ndarray)
    assert w.profile.size == 36
    # Shedding caps default by bus priority.
    b3 = net.bus("b3")
    b4 = net.bus("b4")
    assert (b3.alpha, b3.beta) == (0.10, 0.20)
    assert (b4.alpha, b4.beta) == (0.20, 1.00)


def test_parse_accepts_json_text():
    net = parse_network(json.dumps(minimal_doc()))
    assert net.bus_ids == ["1", "2"]


def test_unknown_keys_rejected_with_path():
    doc = minimal_doc()
    doc["voltage"] = 345
    with pytest.raises(NetworkFormatError, match="network.*voltage"):
        parse_network(doc)
    doc = minimal_doc()
    doc["corridors"][0]["pmax"] = 5
    with pytest.raises(NetworkFormatError, match=r"corridors\[0\].*pmax"):
        parse_network(doc)
    doc = minimal_doc()
    doc["buses"][1]["priority"] = 3
    with pytest.raises(NetworkFormatError, match=r"buses\[1\].*priority"):
        parse_network(doc)


def test_missing_required_keys_rejected():
    doc = minimal_doc()
    del doc["corridors"][0]["b_pu"]
    with pytest.raises(NetworkFormatError, match=r"corridors\[0\].*b_pu"):
        parse_network(doc)


def test_duplicate_ids_rejected():
    doc = minimal_doc()
    doc["buses"].append({"id": 1})
    with pytest.raises(NetworkFormatError, match="duplicate bus ids"):
        parse_network(doc)


def test_dangling_bus_reference_rejected():
    doc = minimal_doc()
    doc["corridors"][0]["to"] = "nowhere"
    with pytest.raises(NetworkFormatError, match="unknown bus"):
        parse_network(doc)


def test_unknown_profile_reference_rejected():
    doc = minimal_doc()
    doc["buses"][1]["load_profile"] = "no_such_profile"
    with pytest.raises(NetworkFormatError, match="no_such_profile"):
        parse_network(doc)


def test_disconnected_network_rejected():
    doc = minimal_doc()
    doc["buses"].append({"id": 3})
    with pytest.raises(NetworkFormatError, match="disconnected"):
        parse_network(doc)


def test_nonpositive_quantities_rejected():
    for key, value in [("b_pu", 0.0), ("pmax_mw", -5), ("length_miles", 0),
                       ("r_base_mm", 0.0), ("hardening_factor", 1.0)]:
        doc = minimal_doc()
        doc["corridors"][0][key] = value
        with pytest.raises(NetworkFormatError):
            parse_network(doc)


def test_alpha_beta_range_checked():
    doc = minimal_doc()
    doc["buses"][1]["alpha_shed"] = 1.5
    with pytest.raises(NetworkFormatError, match="alpha_shed"):
        parse_network(doc)


def test_wind_profile_capacity_check():
    doc = minimal_doc()
    doc["wind_farms"] = [{"id": "w", "bus": 1, "capacity_mw": 10, "profile": [5, 20]}]
    with pytest.raises(NetworkFormatError, match="exceeds capacity"):
        parse_network(doc)


# ---------------------------------------------------------------- profiles

def test_profile_series_expansion_and_truncation():
    assert np.array_equal(profile_series(7.5, 4), np.full(4, 7.5))
    series = profile_series(np.array([1.0, 2.0, 3.0]), 2)
    assert np.array_equal(series, np.array([1.0, 2.0]))
    with pytest.raises(ValueError, match="profile has 3 steps"):
        profile_series(np.array([1.0, 2.0, 3.0]), 5)


# ---------------------------------------------------------------- per unit

def test_per_unit_round_trip(net6_path):
    net = parse_network(net6_path)
    pu = to_per_unit(net)
    assert pu.per_unit
    assert pu.corridors[0].pmax_mw == pytest.approx(net.corridors[0].pmax_mw / 100.0)
    assert pu.generators[0].pmax_mw == pytest.approx(2.6)
    assert pu.storage_sites[0].z_max_mwh == pytest.approx(2.4)
    # Susceptance stays in per unit.
    assert pu.corridors[0].b_pu == net.corridors[0].b_pu

    back = from_per_unit(pu)
    assert not back.per_unit
    for a, b in zip(back.buses, net.buses):
        assert np.allclose(profile_series(a.load_profile, 36),
                           profile_series(b.load_profile, 36), rtol=1e-12, atol=1e-12)
    for a, b in zip(back.corridors, net.corridors):
        assert a.pmax_mw == pytest.approx(b.pmax_mw, rel=1e-12)
    assert to_per_unit(pu) is pu          # idempotent
    assert from_per_unit(net) is net
