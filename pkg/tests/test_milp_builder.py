"""Model assembly tests: dimensions, cost decomposition, and damage logic."""

import math

import numpy as np
import pytest

from icegrid.grid_model import (
    Bus,
    Corridor,
    Generator,
    Network,
    StorageSite,
)
from icegrid.milp_builder import (
    BudgetConfig,
    CostConfig,
    audit_solution,
    build_extensive,
    build_subproblem,
    capital_recovery_factor,
    decode_solution,
    storage_daily_capital,
)
from icegrid.predictive import partition_horizon
from icegrid.scenario import (
    DamageSeries,
    Episode,
    Scenario,
    ScenarioConfig,
    generate_set,
)
from icegrid.solver import SolveOptions, solve_milp


# horizon: T0={1,2}, TN={3..6}, TE={7..12}
HORIZON_12 = partition_horizon(total=12, storm_start=7, storm_end=12, xi=4)
# tiny horizon: T0={1}, TN={2}, TE={3,4}
HORIZON_4 = partition_horizon(total=4, storm_start=3, storm_end=4, xi=1)


def tiny_net(hardening_cost: float = 1000.0) -> Network:
    return Network(
        buses=(Bus(id="b1"), Bus(id="b2")),
        corridors=(
            Corridor(
                id="c1", from_bus="b1", to_bus="b2", b_pu=5.0, pmax_mw=100.0,
                length_miles=30.0, segments=3, r_base_mm=10.0,
                hardening_cost=hardening_cost,
            ),
        ),
        generators=(Generator(id="g1", bus="b1", pmax_mw=50.0, cost_per_mwh=20.0),),
        base_mva=100.0,
    )


def tiny_scenario(net: Network, storm_hits: bool) -> Scenario:
    total = HORIZON_4.total
    episode = Episode(start=3, length=2) if storm_hits else None
    return Scenario(
        id=0,
        probability=1.0,
        kappa={b.id: 1.0 for b in net.buses},
        load={"b1": np.zeros(total), "b2": np.full(total, 10.0)},
        wind={},
        damage=DamageSeries(
            total_steps=total,
            phi_o={"c1": episode},
            phi_w={"c1": None},
            wind_out={},
        ),
    )


def solve_and_decode(problem, **opt_kwargs):
    result = solve_milp(problem, SolveOptions(relative_mip_gap=0.0, **opt_kwargs))
    assert result.status == "optimal", result.message
    return result, decode_solution(problem, result.x)


class TestTinyInstances:
    def test_hardening_chosen_when_it_beats_shedding(self):
        net = tiny_net()
        problem = build_extensive(net, [tiny_scenario(net, True)], HORIZON_4)
        result, plan = solve_and_decode(problem)
        # hardening ($1000) plus two priced pre-storm steps of 10 MW at $20
        assert plan.hardening == {"c1": 1}
        assert plan.investment_cost == pytest.approx(1000.0)
        assert plan.psi_normal[0] == pytest.approx(400.0)
        assert plan.psi_emergency[0] == pytest.approx(0.0)
        assert result.objective == pytest.approx(1400.0, rel=1e-6)

    def test_zero_line_budget_forces_emergency_shedding(self):
        net = tiny_net()
        problem = build_extensive(
            net, [tiny_scenario(net, True)], HORIZON_4,
            budgets=BudgetConfig(lines=0.0),
        )
        result, plan = solve_and_decode(problem)
        assert plan.hardening == {"c1": 0}
        # b2 islanded for 2 steps: 10 MW shed at $2000 each, plus $400 of fuel
        assert plan.psi_emergency[0] == pytest.approx(40000.0)
        assert result.objective == pytest.approx(40400.0, rel=1e-6)

    def test_no_hazard_means_no_investment_no_shedding(self):
        net = tiny_net()
        problem = build_extensive(net, [tiny_scenario(net, False)], HORIZON_4)
        result, plan = solve_and_decode(problem)
        assert plan.hardening == {"c1": 0}
        assert plan.investment_cost == 0.0
        assert all(np.all(s == 0) for s in plan.schedules[0]["shed"].values())
        assert result.objective == pytest.approx(400.0, rel=1e-6)

    def test_audit_is_clean_on_solved_instance(self):
        net = tiny_net()
        problem = build_extensive(net, [tiny_scenario(net, True)], HORIZON_4)
        result, _ = solve_and_decode(problem)
        audit = audit_solution(problem, result.x)
        assert audit["max_balance_residual_pu"] <= 1e-6
        assert audit["max_flow_on_dead_corridor"] <= 1e-6

    def test_preventive_cap_binds_during_preparation(self):
        # make the corridor unsalvageable and fuel absurdly expensive so the
        # model sheds as much as the preparation-window cap allows
        net = tiny_net()
        scenario = tiny_scenario(net, True)
        costs = CostConfig(gen_override=3000.0)
        problem = build_extensive(
            net, [scenario], HORIZON_4, costs=costs,
            budgets=BudgetConfig(lines=0.0),
        )
        result, plan = solve_and_decode(problem)
        shed = plan.schedules[0]["shed"]["b2"]
        assert shed[0] == pytest.approx(0.0)              # pre-awareness: pinned
        assert shed[1] == pytest.approx(0.20 * 10.0)       # alpha cap, normal bus
        assert np.all(shed[2:] <= 10.0 + 1e-9)


class StorageFixture:
    """One-bus system that must bank energy before a supply shortfall."""

    def __init__(self):
        self.net = Network(
            buses=(Bus(id="b1"),),
            corridors=(),
            generators=(Generator(id="g1", bus="b1", pmax_mw=20.0, cost_per_mwh=10.0),),
            storage_sites=(StorageSite(bus="b1", z_max_mwh=100.0, ep_ratio_h=1.0),),
            base_mva=100.0,
        )
        load = np.array([6.0, 6.0, 30.0, 30.0])
        self.scenario = Scenario(
            id=0, probability=1.0, kappa={"b1": 1.0}, load={"b1": load},
            wind={}, damage=DamageSeries(4, {}, {}, {}),
        )

    def build(self, **kwargs):
        return build_extensive(self.net, [self.scenario], HORIZON_4, **kwargs)


class TestStorage:
    def test_storage_covers_shortfall_instead_of_shedding(self):
        fx = StorageFixture()
        problem = fx.build()
        result, plan = solve_and_decode(problem)
        # 10 MW shortfall for two storm steps must come out of the battery
        assert plan.storage_mwh["b1"] > 20.0
        assert sum(plan.schedules[0]["shed"]["b1"]) <= 1e-6
        audit = audit_solution(problem, result.x)
        assert audit["max_soc_chain_error"] <= 1e-6
        assert audit["max_soc_window_violation"] <= 1e-6
        assert audit["max_charge_discharge_overlap"] <= 1e-6

    def test_per_step_modes_add_columns(self):
        fx = StorageFixture()
        shared = fx.build()
        per_step = fx.build(per_step_modes=True)
        # one site, two normal steps: 2 shared binaries become 4
        assert per_step.n_cols == shared.n_cols + 2

    def test_initial_soc_fraction_enters_dynamics(self):
        fx = StorageFixture()
        problem = fx.build(costs=CostConfig(s0_frac=0.5))
        result, plan = solve_and_decode(problem)
        audit_free = audit_solution(problem, result.x)
        assert audit_free["max_soc_chain_error"] <= 1e-6
        # pre-charged battery should not need more than the energy drawn
        full = solve_and_decode(fx.build())[1]
        assert plan.objective <= full.objective + 1e-6


class TestCountFormula:
    def test_dimensions_match_closed_form(self, net6):
        horizon = HORIZON_12
        scen_set = generate_set(net6, horizon, ScenarioConfig(), seed=99, count=2)
        problem = build_extensive(net6, scen_set.scenarios, horizon)

        n_b = len(net6.buses)
        n_l = len(net6.corridors)
        n_g = len(net6.generators)
        n_w = len(net6.wind_farms)
        n_s = len(net6.storage_sites)
        t_all = horizon.total
        t_e = len(horizon.te_steps)

        per_scenario_cols = t_all * (n_g + n_l + 2 * n_b + n_w + 3 * n_s)
        per_scenario_cols += 2 * n_s + 2 * n_s * t_e  # mode binaries
        assert problem.n_cols == n_l + n_s + 2 * per_scenario_cols

        expected_rows = 2  # line and storage budgets
        for s in scen_set.scenarios:
            expected_rows += n_b * t_all                  # balance
            expected_rows += n_l * (t_all - t_e)          # flow definition, normal
            expected_rows += 6 * n_s * t_all              # soc, cap, 2 ratings, 2 modes
            expected_rows += n_s * (1 + t_e)              # mode exclusivity
            for lc in net6.corridors:
                po = s.damage.phi_o_series(lc.id)
                pw = s.damage.phi_w_series(lc.id)
                for t in horizon.te_steps:
                    o, w = po[t - 1], pw[t - 1]
                    if o == w:
                        expected_rows += 1 if o == 0 else 0
                    else:
                        expected_rows += 4
        assert problem.n_rows == expected_rows
        assert len(problem.row_tags) == problem.n_rows

    def test_probabilities_must_sum_to_one(self, net6):
        scen_set = generate_set(net6, HORIZON_12, ScenarioConfig(), seed=1, count=2)
        bad = [
            Scenario(s.id, 0.4, s.kappa, s.load, s.wind, s.damage)
            for s in scen_set.scenarios
        ]
        with pytest.raises(ValueError, match="sum"):
            build_extensive(net6, bad, HORIZON_12)


class TestSubproblem:
    def test_proximal_terms_enter_objective_exactly(self):
        net = tiny_net()
        scenario = tiny_scenario(net, True)
        w = np.array([250.0])
        v_hat = np.array([0.0])
        rho = 400.0
        problem = build_subproblem(
            net, scenario, HORIZON_4, w=w, v_hat=v_hat, rho=rho,
        )
        result, plan = solve_and_decode(problem)
        x_val = plan.hardening["c1"]
        expected_prox = w[0] * x_val + 0.5 * rho * (x_val - v_hat[0]) ** 2
        assert plan.proximal_cost == pytest.approx(expected_prox, abs=1e-9)
        assert plan.objective == pytest.approx(
            plan.expected_cost + expected_prox, rel=1e-9,
        )

    def test_storage_deviation_is_absolute_value(self):
        fx = StorageFixture()
        anchor = 40.0
        rho = 2.0
        problem = build_subproblem(
            fx.net, fx.scenario, HORIZON_4,
            w=np.zeros(1), v_hat=np.array([anchor]), rho=rho,
        )
        result, plan = solve_and_decode(problem)
        z_val = plan.storage_mwh["b1"]
        assert plan.proximal_cost == pytest.approx(
            0.5 * rho * abs(z_val - anchor), rel=1e-6,
        )

    def test_zero_penalty_subproblem_matches_single_scenario_extensive(self):
        net = tiny_net()
        scenario = tiny_scenario(net, True)
        sub = build_subproblem(net, scenario, HORIZON_4)
        ext = build_extensive(net, [scenario], HORIZON_4)
        r_sub, _ = solve_and_decode(sub)
        r_ext, _ = solve_and_decode(ext)
        assert r_sub.objective == pytest.approx(r_ext.objective, rel=1e-9)


class TestDecodeValidation:
    def test_fractional_binary_is_rejected(self):
        net = tiny_net()
        problem = build_extensive(net, [tiny_scenario(net, True)], HORIZON_4)
        x = np.zeros(problem.n_cols)
        x[problem.index.col("x", "c1")] = 0.5
        with pytest.raises(ValueError, match="integrality"):
            decode_solution(problem, x)

    def test_wrong_length_is_rejected(self):
        net = tiny_net()
        problem = build_extensive(net, [tiny_scenario(net, True)], HORIZON_4)
        with pytest.raises(ValueError, match="columns"):
            decode_solution(problem, np.zeros(3))


class TestCapitalCost:
    def test_capital_recovery_factor_value(self):
        # r(1+r)^n / ((1+r)^n - 1) at 5% over 10 years
        assert capital_recovery_factor(0.05, 10) == pytest.approx(
            0.12950457496545670, abs=1e-15,
        )

    def test_daily_capital_combines_energy_and_power(self):
        site = StorageSite(bus="b", z_max_mwh=10.0, ep_ratio_h=6.0,
                           energy_cost_per_kwh=75.0, power_cost_per_kw=1300.0)
        crf = capital_recovery_factor(0.05, 10)
        expected = (75.0 + 1300.0 / 6.0) * 1000.0 * crf / 365.0
        got = storage_daily_capital(site, CostConfig())
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(103.48539095413199, rel=1e-12)
