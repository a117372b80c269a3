"""Scenario sampling tests.

Groups:
  1. substream determinism and thread-count independence;
  2. storm and load sampling: shapes, floors, truncation bounds, first-step
     Monte Carlo calibration;
  3. conditional hazards: telescoping back to the cumulative curve;
  4. damage series: single-episode shape, repair truncation, pathwise
     dominance, single-segment frequency calibration;
  5. line-status composition against an elementwise oracle;
  6. canonical persistence round trip.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icegrid.grid_model import parse_network
from icegrid.hazard import WeatherStep, segment_failure_prob
from icegrid.predictive import partition_horizon
from icegrid.scenario import (
    DamageSeries,
    Episode,
    Scenario,
    ScenarioConfig,
    ScenarioSet,
    StormSample,
    _stream,
    compose_line_status,
    conditional_hazards,
    generate_set,
    load_scenario_set,
    sample_damage_series,
    sample_loads,
    sample_storm,
    save_scenario_set,
    scenario_set_to_doc,
)

HORIZON = partition_horizon(total=12, storm_start=7, storm_end=12, xi=4)


def tiny_net(r_base=10.0, segments=1, hardening_factor=2.0):
    return parse_network({
        "buses": [{"id": "a", "load_profile": "flat:10"}, {"id": "b"}],
        "corridors": [{"id": "c1", "from": "a", "to": "b", "b_pu": 5.0,
                       "pmax_mw": 100, "length_miles": 10, "segments": segments,
                       "r_base_mm": r_base, "hardening_factor": hardening_factor}],
        "generators": [{"id": "g", "bus": "a", "pmax_mw": 50, "cost_per_mwh": 10}],
    })


def constant_thickness_storm(r_level: float, n_steps: int, corridor_ids) -> StormSample:
    """Thickness jumps to r_level at step 1, then no further accretion."""
    pr0 = r_level * 0.9 * math.pi  # calm-air accretion inverts to Pr = r*rho_i*pi
    weather = [WeatherStep(pr0, 0.0)] + [WeatherStep(0.0, 0.0)] * (n_steps - 1)
    return StormSample(weather=tuple(weather), intensity={c: 1.0 for c in corridor_ids})


# ------------------------------------------------------------- determinism

def test_streams_reproducible_and_distinct():
    a = _stream(7, 3, 2).random(5)
    b = _stream(7, 3, 2).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, _stream(7, 4, 2).random(5))
    assert not np.array_equal(a, _stream(7, 3, 1).random(5))
    assert not np.array_equal(a, _stream(8, 3, 2).random(5))


def test_generate_set_thread_invariance(net6_path):
    net = parse_network(net6_path)
    h = partition_horizon(36, 13, 36, 4)
    cfg = ScenarioConfig()
    doc1 = scenario_set_to_doc(generate_set(net, h, cfg, seed=11, count=8, threads=1))
    doc4 = scenario_set_to_doc(generate_set(net, h, cfg, seed=11, count=8, threads=4))
    assert json.dumps(doc1, sort_keys=True) == json.dumps(doc4, sort_keys=True)


def test_appending_scenarios_preserves_existing(net6_path):
    net = parse_network(net6_path)
    h = partition_horizon(36, 13, 36, 4)
    cfg = ScenarioConfig()
    small = generate_set(net, h, cfg, seed=3, count=3)
    large = generate_set(net, h, cfg, seed=3, count=6)
    for s_small, s_large in zip(small.scenarios, large.scenarios):
        assert s_small.kappa == s_large.kappa
        assert s_small.damage.phi_o == s_large.damage.phi_o


# ----------------------------------------------------------------- weather

def test_sample_storm_shapes_and_bounds():
    cfg = ScenarioConfig()
    storm = sample_storm(cfg, _stream(1, 0, 0), 6, ["c2", "c1"])
    assert len(storm.weather) == 6
    assert set(storm.intensity) == {"c1", "c2"}
    for w in storm.weather:
        assert w.precip_rate >= 0.0
        assert w.wind_speed >= 0.0
    for factor in storm.intensity.values():
        assert 0.8 <= factor <= 1.2


def test_storm_first_step_mean_calibration():
    # First AR(1) step is an undamped standard normal, so the first-step
    # precipitation is N(mean, std) floored at zero; with mean >> std the
    # floor is negligible and the sample mean must sit within 3 SE.
    cfg = ScenarioConfig(pr_mean=10.0, pr_std=2.0)
    n = 10_000
    first = np.array([
        sample_storm(cfg, _stream(42, sid, 0), 3, ["c1"]).weather[0].precip_rate
        for sid in range(n)
    ])
    se = cfg.pr_std / math.sqrt(n)
    assert abs(first.mean() - cfg.pr_mean) < 3 * se


def test_sample_loads_truncation_and_scaling():
    net = tiny_net()
    cfg = ScenarioConfig(kappa_std=2.0)  # huge spread forces clipping
    kappa, load = sample_loads(net, cfg, _stream(5, 0, 1), 12)
    for k in kappa.values():
        assert 0.5 <= k <= 1.5
    assert np.allclose(load["a"], kappa["a"] * 10.0)
    assert np.allclose(load["b"], 0.0)


# ----------------------------------------------------------------- hazards

def test_conditional_hazards_reference():
    f = np.array([0.1, 0.1, 0.55, 1.0, 1.0])
    h = conditional_hazards(f)
    assert h[0] == pytest.approx(0.1)
    assert h[1] == pytest.approx(0.0)
    assert h[2] == pytest.approx((0.55 - 0.1) / 0.9)
    assert h[3] == pytest.approx(1.0)
    assert h[4] == pytest.approx(1.0)  # conditioned on an impossible past


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12))
@settings(max_examples=80)
def test_conditional_hazards_telescope(raw):
    f = np.minimum(np.maximum.accumulate(np.array(raw)), 1.0)
    h = conditional_hazards(f)
    survival = np.cumprod(1.0 - h)
    assert np.allclose(survival, 1.0 - f, atol=1e-12)


def test_conditional_hazards_rejects_decreasing():
    with pytest.raises(ValueError):
        conditional_hazards(np.array([0.5, 0.4]))


# ------------------------------------------------------------ damage series

def _draw_damage(net, storm, sid, cfg=None):
    cfg = cfg or ScenarioConfig()
    return sample_damage_series(
        net, HORIZON, storm, cfg,
        _stream(99, sid, 2), _stream(99, sid, 3), _stream(99, sid, 4),
    )


def test_damage_series_shape_and_truncation():
    net = tiny_net(r_base=1.0)  # storm thickness >> 5R: fails at step 1
    storm = constant_thickness_storm(20.0, 6, ["c1"])
    for sid in range(50):
        dmg = _draw_damage(net, storm, sid)
        series = dmg.phi_o_series("c1")
        ones = np.flatnonzero(series)
        assert ones.size >= 1
        # Exactly one contiguous outage block.
        assert np.array_equal(ones, np.arange(ones[0], ones[-1] + 1))
        ep = dmg.phi_o["c1"]
        assert ep.start == HORIZON.storm_start  # certain failure at onset
        # Window is the repair draw, truncated at the horizon end.
        assert ep.length == min(dmg.repair_hours["c1"], HORIZON.total - ep.start + 1)
        assert ep.stop <= HORIZON.total
        assert dmg.dominance_ok()


def test_damage_dominance_bulk(net6_path):
    net = parse_network(net6_path)
    h = partition_horizon(36, 13, 36, 4)
    cfg = ScenarioConfig()
    ss = generate_set(net, h, cfg, seed=2024, count=300)
    for s in ss.scenarios:
        assert s.damage.dominance_ok()
        for cid in s.damage.phi_w:
            ep_w, ep_o = s.damage.phi_w[cid], s.damage.phi_o[cid]
            assert ep_w is None or ep_w == ep_o


def test_single_segment_frequency_matches_fragility_curve():
    # Constant thickness r in (R, 2R): the corridor-level storm failure
    # probability collapses to the segment curve F(r); hardened never fails.
    r_base, r_level = 10.0, 15.0
    net = tiny_net(r_base=r_base, segments=1)
    storm = constant_thickness_storm(r_level, 6, ["c1"])
    expected = segment_failure_prob(r_level, r_base)
    n = 10_000
    fails_o = fails_w = 0
    for sid in range(n):
        dmg = _draw_damage(net, storm, sid)
        fails_o += dmg.phi_o["c1"] is not None
        fails_w += dmg.phi_w["c1"] is not None
    freq = fails_o / n
    se = math.sqrt(expected * (1.0 - expected) / n)
    assert abs(freq - expected) < 2 * se
    assert fails_w == 0  # below the hardened design thickness


def test_hardened_frequency_never_exceeds_unhardened():
    # Thickness above the hardened design threshold: both can fail.
    net = tiny_net(r_base=10.0, segments=2)
    storm = constant_thickness_storm(28.0, 6, ["c1"])
    fails_o = fails_w = 0
    for sid in range(2_000):
        dmg = _draw_damage(net, storm, sid)
        fails_o += dmg.phi_o["c1"] is not None
        fails_w += dmg.phi_w["c1"] is not None
    assert 0 < fails_w <= fails_o


def test_multi_segment_is_more_fragile():
    storm = constant_thickness_storm(15.0, 6, ["c1"])
    counts = []
    for segments in (1, 4):
        net = tiny_net(r_base=10.0, segments=segments)
        fails = sum(
            _draw_damage(net, storm, sid).phi_o["c1"] is not None
            for sid in range(2_000)
        )
        counts.append(fails)
    assert counts[1] > counts[0]


def test_storm_length_mismatch_rejected():
    net = tiny_net()
    storm = constant_thickness_storm(15.0, 4, ["c1"])  # horizon wants 6
    with pytest.raises(ValueError, match="storm has 4 steps"):
        _draw_damage(net, storm, 0)


# -------------------------------------------------------------- composition

def test_compose_line_status_matches_oracle():
    damage = DamageSeries(
        total_steps=12,
        phi_o={"c1": Episode(7, 3), "c2": Episode(8, 5), "c3": None},
        phi_w={"c1": Episode(7, 3), "c2": None, "c3": None},
        wind_out={},
    )
    mu = compose_line_status({"c1": 0, "c2": 1, "c3": 1}, damage)
    for cid, x in (("c1", 0), ("c2", 1), ("c3", 1)):
        phi_o = damage.phi_o_series(cid)
        phi_w = damage.phi_w_series(cid)
        expected = (1 - x) * phi_o + x * phi_w
        assert np.array_equal(mu[cid], expected)
    assert mu["c2"].sum() == 0  # hardening erased the outage


def test_compose_rejects_fractional_decision():
    damage = DamageSeries(total_steps=5, phi_o={"c1": None}, phi_w={"c1": None}, wind_out={})
    with pytest.raises(ValueError):
        compose_line_status({"c1": 0.5}, damage)


def test_damage_series_rejects_non_nested_episodes():
    with pytest.raises(ValueError, match="not nested"):
        DamageSeries(
            total_steps=12,
            phi_o={"c1": Episode(7, 2)},
            phi_w={"c1": Episode(8, 2)},
            wind_out={},
        )


# ------------------------------------------------------------- persistence

def test_save_load_round_trip(tmp_path, net6_path):
    net = parse_network(net6_path)
    h = partition_horizon(36, 13, 36, 4)
    ss = generate_set(net, h, ScenarioConfig(), seed=5, count=4)
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    save_scenario_set(ss, p1)
    loaded = load_scenario_set(p1)
    save_scenario_set(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()

    assert len(loaded) == 4
    assert loaded.meta == ss.meta
    for a, b in zip(loaded.scenarios, ss.scenarios):
        assert a.probability == b.probability
        assert a.kappa == b.kappa
        assert a.damage.phi_o == b.damage.phi_o
        assert a.damage.phi_w == b.damage.phi_w
        for bus in a.load:
            assert np.array_equal(a.load[bus], b.load[bus])


def test_generate_byte_identical_across_runs(tmp_path, net6_path):
    net = parse_network(net6_path)
    h = partition_horizon(36, 13, 36, 4)
    cfg = ScenarioConfig()
    pa, pb = tmp_path / "run1.json", tmp_path / "run2.json"
    save_scenario_set(generate_set(net, h, cfg, seed=17, count=6), pa)
    save_scenario_set(generate_set(net, h, cfg, seed=17, count=6), pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_probabilities_sum_to_one(net6_path):
    net = parse_network(net6_path)
    h = partition_horizon(36, 13, 36, 4)
    ss = generate_set(net, h, ScenarioConfig(), seed=1, count=7)
    assert sum(s.probability for s in ss.scenarios) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError, match="sum"):
        ScenarioSet(meta={}, scenarios=tuple(
            Scenario(id=s.id, probability=0.9 / 7, kappa=s.kappa, load=s.load,
                     wind=s.wind, damage=s.damage)
            for s in ss.scenarios
        ))
