"""Analysis artifacts: strategy comparison, preparation-time sweeps, reports.

Every cost figure comes from decoded schedules (decode_solution recomputes the
split and asserts it against the solver objective), never from the raw
objective alone. Infeasible runs become data rows, not exceptions.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import pha as pha_mod
from .grid_model import Network
from .milp_builder import (
    BudgetConfig,
    CostConfig,
    PlanSolution,
    build_extensive,
    decode_solution,
)
from .predictive import Horizon
from .scenario import Scenario
from .solver import SolveOptions, solve_milp

__all__ = [
    "SweepRow",
    "StrategyResult",
    "PlanRun",
    "solve_plan",
    "strategy_compare",
    "sweep_xi",
    "render_reports",
]

STRATEGY_IDS = ("I", "II", "III", "IV")

SWEEP_HEADER = [
    "xi", "feasible", "preventive_shed_mwh", "emergency_shed_mwh",
    "preventive_cost", "emergency_cost", "total_cost", "hardening_cost",
    "storage_mwh_by_bus", "marginal_preventive_cost_increment",
]
STRATEGY_HEADER = ["strategy", "feasible", "preparation_cost", "emergency_cost"]
INVESTMENT_HEADER = ["component", "kind", "value"]


@dataclass
class SweepRow:
    xi: int
    feasible: bool
    preventive_shed_mwh: float | None
    emergency_shed_mwh: float | None
    preventive_cost: float | None
    emergency_cost: float | None
    total_cost: float | None
    hardening_cost: float | None
    storage_mwh_by_bus: dict[str, float] | None
    marginal_preventive_cost_increment: float | None


@dataclass
class StrategyResult:
    strategy: str
    feasible: bool
    preparation_cost: float | None
    emergency_cost: float | None


@dataclass
class PlanRun:
    """One solved planning instance with its decoded plan (None if infeasible)."""

    feasible: bool
    plan: PlanSolution | None
    status: str
    objective: float | None


def solve_plan(
    net: Network,
    scenarios: Sequence[Scenario],
    horizon: Horizon,
    costs: CostConfig | None = None,
    budgets: BudgetConfig | None = None,
    solve_options: SolveOptions | None = None,
    mode: str = "extensive",
    pha_config: "pha_mod.PhaConfig | None" = None,
    per_step_modes: bool = False,
    forbid_hardening: bool = False,
) -> PlanRun:
    """Solve one planning instance by the requested decomposition."""
    costs = costs or CostConfig()
    budgets = budgets or BudgetConfig()
    options = solve_options or SolveOptions()
    if mode == "pha":
        config = pha_config or pha_mod.PhaConfig(solve_options=options)
        pinned = {c.id: 0 for c in net.corridors} if forbid_hardening else None
        out = pha_mod.run(net, scenarios, horizon, costs, budgets, config,
                          per_step_modes=per_step_modes, fixed_hardening=pinned)
        if out.status == "infeasible" or out.true_cost is None:
            return PlanRun(False, None, out.status, None)
        plan = _merge_scenario_plans(net, out)
        return PlanRun(True, plan, out.status, out.true_cost)
    if mode != "extensive":
        raise ValueError(f"unknown mode {mode!r}")
    problem = build_extensive(net, scenarios, horizon, costs, budgets,
                              per_step_modes=per_step_modes)
    if forbid_hardening:
        lo = problem.col_lower.copy()
        hi = problem.col_upper.copy()
        start, stop = problem.index.block("x")
        lo[start:stop] = 0.0
        hi[start:stop] = 0.0
        problem = problem.with_col_bounds(lo, hi)
    result = solve_milp(problem, options)
    if not result.ok:
        return PlanRun(False, None, result.status, None)
    plan = decode_solution(problem, result.x)
    return PlanRun(True, plan, result.status, result.objective)


def _merge_scenario_plans(net: Network, out: "pha_mod.PhaOutcome") -> PlanSolution:
    """Stitch the per-scenario recourse plans behind a consensus first stage
    into one PlanSolution-shaped record with probability-weighted costs."""
    plans = out.scenario_plans
    any_plan = next(iter(plans.values()))
    psi_n = {sid: p.psi_normal[sid] for sid, p in plans.items()}
    psi_e = {sid: p.psi_emergency[sid] for sid, p in plans.items()}
    return PlanSolution(
        hardening=dict(out.hardening),
        storage_mwh=dict(out.storage_mwh),
        schedules={sid: p.schedules[sid] for sid, p in plans.items()},
        investment_cost=any_plan.investment_cost,
        psi_normal=psi_n,
        psi_emergency=psi_e,
        expected_cost=out.true_cost,
        proximal_cost=0.0,
        objective=out.true_cost,
    )


def _expected(plans_probs, values: dict[int, float]) -> float:
    return sum(p * values[sid] for sid, p in plans_probs)


def _plan_costs(plan: PlanSolution, scenarios: Sequence[Scenario]) -> dict:
    pairs = [(s.id, s.probability) for s in scenarios]
    horizon_shed = {
        sid: plan.schedules[sid]["shed"] for sid, _ in pairs
    }
    return {
        "investment": plan.investment_cost,
        "preventive_cost": _expected(pairs, plan.psi_normal),
        "emergency_cost": _expected(pairs, plan.psi_emergency),
        "total": plan.expected_cost,
        "shed_by_scenario": horizon_shed,
    }


def _expected_shed(plan: PlanSolution, scenarios: Sequence[Scenario],
                   steps: Sequence[int]) -> float:
    total = 0.0
    for s in scenarios:
        sched = plan.schedules[s.id]["shed"]
        total += s.probability * sum(
            float(series[t - 1]) for series in sched.values() for t in steps
        )
    return total


def strategy_compare(
    net: Network,
    scenarios: Sequence[Scenario],
    horizon: Horizon,
    costs: CostConfig | None = None,
    budgets: BudgetConfig | None = None,
    solve_options: SolveOptions | None = None,
    mode: str = "extensive",
    pha_config: "pha_mod.PhaConfig | None" = None,
    per_step_modes: bool = False,
) -> list[StrategyResult]:
    """Four planning postures on one instance.

    I  full model; II no preparation window (xi=0); III flat preventive
    penalty (b=0); IV hardening unavailable (x pinned to zero, zero cost).
    """
    costs = costs or CostConfig()
    variants = {
        "I": dict(horizon=horizon, costs=costs, forbid_hardening=False),
        "II": dict(horizon=horizon.with_xi(0), costs=costs, forbid_hardening=False),
        "III": dict(
            horizon=horizon,
            costs=dataclasses.replace(
                costs, penalty=dataclasses.replace(costs.penalty, b=0.0)),
            forbid_hardening=False,
        ),
        "IV": dict(horizon=horizon, costs=costs, forbid_hardening=True),
    }
    rows = []
    for sid in STRATEGY_IDS:
        spec = variants[sid]
        run = solve_plan(
            net, scenarios, spec["horizon"], spec["costs"], budgets,
            solve_options, mode=mode, pha_config=pha_config,
            per_step_modes=per_step_modes,
            forbid_hardening=spec["forbid_hardening"],
        )
        if not run.feasible:
            rows.append(StrategyResult(sid, False, None, None))
            continue
        kc = _plan_costs(run.plan, scenarios)
        rows.append(StrategyResult(
            sid, True,
            preparation_cost=kc["investment"] + kc["preventive_cost"],
            emergency_cost=kc["emergency_cost"],
        ))
    return rows


def sweep_xi(
    net: Network,
    scenarios: Sequence[Scenario],
    horizon: Horizon,
    xi_values: Sequence[int],
    costs: CostConfig | None = None,
    budgets: BudgetConfig | None = None,
    solve_options: SolveOptions | None = None,
    mode: str = "extensive",
    pha_config: "pha_mod.PhaConfig | None" = None,
    per_step_modes: bool = False,
) -> list[SweepRow]:
    """Re-plan the same scenario set across preparation windows."""
    rows: list[SweepRow] = []
    prev_preventive: float | None = None
    for xi in sorted(xi_values):
        h = horizon.with_xi(xi)
        run = solve_plan(net, scenarios, h, costs, budgets, solve_options,
                         mode=mode, pha_config=pha_config,
                         per_step_modes=per_step_modes)
        if not run.feasible:
            rows.append(SweepRow(xi, False, None, None, None, None, None,
                                 None, None, None))
            continue
        plan = run.plan
        kc = _plan_costs(plan, scenarios)
        preventive_cost = kc["preventive_cost"]
        marginal = None if prev_preventive is None else preventive_cost - prev_preventive
        prev_preventive = preventive_cost
        hardening_cost = sum(
            c.hardening_cost * plan.hardening[c.id] for c in net.corridors
        )
        rows.append(SweepRow(
            xi=xi,
            feasible=True,
            preventive_shed_mwh=_expected_shed(plan, scenarios, list(h.tn_steps)),
            emergency_shed_mwh=_expected_shed(plan, scenarios, list(h.te_steps)),
            preventive_cost=preventive_cost,
            emergency_cost=kc["emergency_cost"],
            total_cost=kc["total"],
            hardening_cost=hardening_cost,
            storage_mwh_by_bus=dict(plan.storage_mwh),
            marginal_preventive_cost_increment=marginal,
        ))
    return rows


# ---------------------------------------------------------------- rendering

def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, dict):
        return ";".join(f"{k}={_fmt(v)}" for k, v in sorted(value.items()))
    if isinstance(value, float):
        if math.isnan(value):
            return "-"
        return f"{value:.6f}".rstrip("0").rstrip(".")
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows([[_fmt(v) for v in row] for row in rows])


def _polyline_svg(series: list[tuple[str, list[tuple[float, float]]]],
                  title: str, x_label: str, y_label: str) -> str:
    """Standalone SVG with one polyline per named series."""
    width, height, pad = 640, 400, 56
    pts = [p for _, line in series for p in line]
    if not pts:
        body = ["<text x='320' y='200' text-anchor='middle'>no data</text>"]
        return _svg_doc(width, height, title, body)
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def sx(x):
        return pad + (x - x_lo) / x_span * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y_lo) / y_span * (height - 2 * pad)

    palette = ["#1f6fb2", "#c0392b", "#27885b", "#8e44ad"]
    body = [
        f"<rect x='{pad}' y='{pad}' width='{width - 2 * pad}' "
        f"height='{height - 2 * pad}' fill='none' stroke='#888'/>",
        f"<text x='{width / 2:.0f}' y='{height - 12}' text-anchor='middle' "
        f"font-size='13'>{x_label}</text>",
        f"<text x='16' y='{height / 2:.0f}' text-anchor='middle' font-size='13' "
        f"transform='rotate(-90 16 {height / 2:.0f})'>{y_label}</text>",
        f"<text x='{pad}' y='{height - pad + 16}' font-size='11'>{_fmt(x_lo)}</text>",
        f"<text x='{width - pad}' y='{height - pad + 16}' text-anchor='end' "
        f"font-size='11'>{_fmt(x_hi)}</text>",
        f"<text x='{pad - 4}' y='{height - pad}' text-anchor='end' "
        f"font-size='11'>{_fmt(y_lo)}</text>",
        f"<text x='{pad - 4}' y='{pad + 4}' text-anchor='end' "
        f"font-size='11'>{_fmt(y_hi)}</text>",
    ]
    for k, (name, line) in enumerate(series):
        color = palette[k % len(palette)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in line)
        body.append(f"<polyline points='{coords}' fill='none' "
                    f"stroke='{color}' stroke-width='2'/>")
        for x, y in line:
            body.append(f"<circle cx='{sx(x):.2f}' cy='{sy(y):.2f}' r='3' "
                        f"fill='{color}'/>")
        body.append(f"<text x='{width - pad + 4}' y='{pad + 16 * (k + 1)}' "
                    f"font-size='12' fill='{color}'>{name}</text>")
    return _svg_doc(width, height, title, body)


def _svg_doc(width: int, height: int, title: str, body: list[str]) -> str:
    head = (
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' "
        f"height='{height}' viewBox='0 0 {width} {height}'>"
        f"<title>{title}</title>"
        f"<rect width='{width}' height='{height}' fill='white'/>"
        f"<text x='{width / 2:.0f}' y='24' text-anchor='middle' "
        f"font-size='15'>{title}</text>"
    )
    return head + "".join(body) + "</svg>\n"


def render_reports(
    destination: str | Path,
    sweep: Sequence[SweepRow] = (),
    strategies: Sequence[StrategyResult] = (),
    investment: PlanSolution | None = None,
    header_note: str = "",
) -> list[Path]:
    """Write sweep.csv, strategies.csv, investment.csv, summary.md, and the
    two SVG charts; returns the written paths."""
    out = Path(destination)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    sweep_rows = [
        [r.xi, r.feasible, r.preventive_shed_mwh, r.emergency_shed_mwh,
         r.preventive_cost, r.emergency_cost, r.total_cost, r.hardening_cost,
         r.storage_mwh_by_bus, r.marginal_preventive_cost_increment]
        for r in sweep
    ]
    path = out / "sweep.csv"
    _write_csv(path, SWEEP_HEADER, sweep_rows)
    written.append(path)

    strat_rows = [
        [r.strategy, r.feasible, r.preparation_cost, r.emergency_cost]
        for r in strategies
    ]
    path = out / "strategies.csv"
    _write_csv(path, STRATEGY_HEADER, strat_rows)
    written.append(path)

    inv_rows: list[list] = []
    if investment is not None:
        for cid, val in sorted(investment.hardening.items()):
            inv_rows.append([cid, "hardening", val])
        for bus, val in sorted(investment.storage_mwh.items()):
            inv_rows.append([bus, "storage_mwh", val])
    path = out / "investment.csv"
    _write_csv(path, INVESTMENT_HEADER, inv_rows)
    written.append(path)

    feasible_sweep = [r for r in sweep if r.feasible]
    cost_series = [
        ("total", [(r.xi, r.total_cost) for r in feasible_sweep]),
        ("preventive", [(r.xi, r.preventive_cost) for r in feasible_sweep]),
        ("emergency", [(r.xi, r.emergency_cost) for r in feasible_sweep]),
    ]
    shed_series = [
        ("preventive", [(r.xi, r.preventive_shed_mwh) for r in feasible_sweep]),
        ("emergency", [(r.xi, r.emergency_shed_mwh) for r in feasible_sweep]),
    ]
    path = out / "cost_vs_xi.svg"
    path.write_text(_polyline_svg(cost_series, "Expected cost vs preparation window",
                                  "preparation window (h)", "cost ($)"))
    written.append(path)
    path = out / "shed_vs_xi.svg"
    path.write_text(_polyline_svg(shed_series, "Load shedding vs preparation window",
                                  "preparation window (h)", "energy (MWh)"))
    written.append(path)

    md = ["# Planning summary", ""]
    if header_note:
        md += [header_note, ""]
    md += ["## Investment", ""]
    if inv_rows:
        md += ["| component | kind | value |", "| --- | --- | --- |"]
        md += [f"| {c} | {k} | {_fmt(v)} |" for c, k, v in inv_rows]
    else:
        md.append("No investment decisions recorded.")
    md += ["", "## Strategy Comparison", ""]
    if strat_rows:
        md += ["| strategy | feasible | preparation_cost | emergency_cost |",
               "| --- | --- | --- | --- |"]
        md += [f"| {s} | {_fmt(f)} | {_fmt(p)} | {_fmt(e)} |"
               for s, f, p, e in strat_rows]
    else:
        md.append("No strategy runs recorded.")
    md += ["", "## Preparation-Time Sweep", ""]
    if sweep_rows:
        md += ["| " + " | ".join(SWEEP_HEADER) + " |",
               "| " + " | ".join(["---"] * len(SWEEP_HEADER)) + " |"]
        md += ["| " + " | ".join(_fmt(v) for v in row) + " |" for row in sweep_rows]
        md += ["", "![cost](cost_vs_xi.svg)", "![shed](shed_vs_xi.svg)"]
    else:
        md.append("No sweep rows recorded.")
    path = out / "summary.md"
    path.write_text("\n".join(md) + "\n")
    written.append(path)
    return written
