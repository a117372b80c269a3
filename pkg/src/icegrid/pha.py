"""Progressive hedging over scenario subproblems.

The first-stage vector v stacks hardening binaries (network corridor order)
then storage sizes (site order). Iteration 0 solves unpenalized subproblems;
every later iteration aggregates v̂ = Σ p(s)·v(s), updates multipliers
w(s) += ρ∘(v(s) − v̂), and re-solves the penalized subproblems. Termination:
residual Σ p(s)·‖v(s) − v̂‖₂ at or below epsilon, an iteration cap, a repeated
multiset of rounded first-stage vectors (cycling), or an infeasible
subproblem, which is reported as data rather than raised.

The returned consensus (majority-rounded binaries, probability-weighted mean
storage) is re-priced honestly: first stage fixed, every scenario's recourse
solved exactly, expected cost assembled from those solves.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid_model import Network
from .milp_builder import (
    BudgetConfig,
    CostConfig,
    PlanSolution,
    build_subproblem,
    decode_solution,
    storage_daily_capital,
)
from .predictive import Horizon
from .problem import MilpProblem
from .scenario import Scenario
from .solver import SolveOptions, SolveResult, solve_milp

__all__ = [
    "PhaConfig",
    "PhaState",
    "PhaOutcome",
    "aggregate",
    "update_multipliers",
    "residual",
    "default_rho",
    "evaluate_first_stage",
    "run",
]

_RHO_FLOOR = 1e-2
_ROUND_DECIMALS = 6


@dataclass(frozen=True)
class PhaConfig:
    rho: float | np.ndarray | None = None  # None: cost-proportional default
    epsilon: float = 1e-4
    max_iterations: int = 40
    fix_after_k: int = 5
    enable_fixing: bool = False
    solve_options: SolveOptions = field(default_factory=SolveOptions)
    threads: int = 1
    log_path: str | Path | None = None

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.rho is not None:
            arr = np.atleast_1d(np.asarray(self.rho, dtype=float))
            if (arr <= 0).any():
                raise ValueError("rho must be > 0")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class PhaState:
    iteration: int
    v: dict[int, np.ndarray]
    w: dict[int, np.ndarray]
    v_hat: np.ndarray
    residual_history: list[float]
    incumbent_v: np.ndarray | None = None
    incumbent_cost: float = math.inf


@dataclass
class PhaOutcome:
    status: str                      # converged | max_iterations | cycling | infeasible
    consensus: np.ndarray | None
    hardening: dict[str, int] | None
    storage_mwh: dict[str, float] | None
    true_cost: float | None
    infeasible_scenarios: list[int]
    residual_trace: list[float]
    iterations: int
    state: PhaState | None
    log_rows: list[dict]
    scenario_plans: dict[int, PlanSolution] | None = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def aggregate(solutions: Sequence[np.ndarray], probabilities: Sequence[float]) -> np.ndarray:
    """Probability-weighted mean of the first-stage vectors."""
    vs = [np.asarray(v, dtype=float) for v in solutions]
    if len({v.shape for v in vs}) > 1:
        raise ValueError("first-stage vectors differ in dimension")
    out = np.zeros_like(vs[0])
    for v, p in zip(vs, probabilities):
        out += p * v
    return out


def update_multipliers(w: np.ndarray, v: np.ndarray, v_hat: np.ndarray,
                       rho: float | np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    v_hat = np.asarray(v_hat, dtype=float)
    if not (w.shape == v.shape == v_hat.shape):
        raise ValueError("multiplier update dimensions disagree")
    return w + np.asarray(rho, dtype=float) * (v - v_hat)


def residual(solutions: Sequence[np.ndarray], v_hat: np.ndarray,
             probabilities: Sequence[float]) -> float:
    return float(sum(
        p * np.linalg.norm(np.asarray(v, dtype=float) - v_hat)
        for v, p in zip(solutions, probabilities)
    ))


def default_rho(net: Network, costs: CostConfig) -> np.ndarray:
    """Cost-proportional weights: |c_j| / max(1, bound range), floored away
    from zero so costless coordinates still feel the anchor."""
    vals = [max(abs(l.hardening_cost), _RHO_FLOOR) for l in net.corridors]
    vals += [
        max(abs(storage_daily_capital(st, costs)) / max(1.0, st.z_max_mwh), _RHO_FLOOR)
        for st in net.storage_sites
    ]
    return np.array(vals)


def _first_stage_vector(net: Network, plan: PlanSolution) -> np.ndarray:
    return np.array(
        [float(plan.hardening[l.id]) for l in net.corridors]
        + [plan.storage_mwh[st.bus] for st in net.storage_sites]
    )


def _fix_first_stage(problem: MilpProblem, net: Network, v: np.ndarray) -> MilpProblem:
    lo = problem.col_lower.copy()
    hi = problem.col_upper.copy()
    for pos, l in enumerate(net.corridors):
        j = problem.index.col("x", l.id)
        lo[j] = hi[j] = round(v[pos])
    for pos, st in enumerate(net.storage_sites):
        j = problem.index.col("z", st.bus)
        lo[j] = hi[j] = v[len(net.corridors) + pos]
    return problem.with_col_bounds(lo, hi)


def _solve_many(problems: dict[int, MilpProblem], options: SolveOptions,
                threads: int) -> dict[int, SolveResult]:
    if threads > 1 and len(problems) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {sid: pool.submit(solve_milp, prob, options)
                       for sid, prob in problems.items()}
            return {sid: fut.result() for sid, fut in futures.items()}
    return {sid: solve_milp(prob, options) for sid, prob in problems.items()}


def evaluate_first_stage(
    net: Network,
    scenarios: Sequence[Scenario],
    horizon: Horizon,
    costs: CostConfig | None = None,
    budgets: BudgetConfig | None = None,
    v: np.ndarray | None = None,
    solve_options: SolveOptions | None = None,
    threads: int = 1,
    per_step_modes: bool = False,
) -> tuple[float | None, dict[int, PlanSolution], list[int]]:
    """Price a fixed first stage by exact recourse solves.

    Returns (expected cost or None when any scenario is infeasible,
    per-scenario decoded plans, ids of infeasible scenarios). Each scenario
    objective already contains the investment, and probabilities sum to one,
    so the probability-weighted sum counts the investment exactly once.
    """
    costs = costs or CostConfig()
    budgets = budgets or BudgetConfig()
    options = solve_options or SolveOptions()
    if v is None:
        raise ValueError("a first-stage vector is required")
    v = np.asarray(v, dtype=float)
    problems = {}
    for s in scenarios:
        prob = build_subproblem(net, s, horizon, costs, budgets,
                                per_step_modes=per_step_modes)
        problems[s.id] = _fix_first_stage(prob, net, v)
    results = _solve_many(problems, options, threads)
    plans: dict[int, PlanSolution] = {}
    bad: list[int] = []
    expected = 0.0
    for s in scenarios:
        res = results[s.id]
        if not res.ok:
            bad.append(s.id)
            continue
        plan = decode_solution(problems[s.id], res.x)
        plans[s.id] = plan
        expected += s.probability * res.objective
    return (None if bad else expected), plans, bad


def _round_key(v: np.ndarray, n_bin: int) -> bytes:
    out = v.copy()
    out[:n_bin] = np.round(out[:n_bin])
    out = np.round(out, _ROUND_DECIMALS) + 0.0  # normalize -0.0
    return out.tobytes()


def _consensus_vector(net: Network, state: PhaState,
                      probabilities: dict[int, float]) -> np.ndarray:
    n_bin = len(net.corridors)
    weighted = aggregate([state.v[sid] for sid in sorted(state.v)],
                         [probabilities[sid] for sid in sorted(state.v)])
    out = weighted.copy()
    out[:n_bin] = (weighted[:n_bin] >= 0.5).astype(float)  # majority vote
    return out


def run(
    net: Network,
    scenarios: Sequence[Scenario],
    horizon: Horizon,
    costs: CostConfig | None = None,
    budgets: BudgetConfig | None = None,
    config: PhaConfig | None = None,
    per_step_modes: bool = False,
    fixed_hardening: dict[str, int] | None = None,
) -> PhaOutcome:
    costs = costs or CostConfig()
    budgets = budgets or BudgetConfig()
    config = config or PhaConfig()
    if not scenarios:
        raise ValueError("at least one scenario is required")

    n_bin = len(net.corridors)
    n_first = n_bin + len(net.storage_sites)
    if config.rho is None:
        rho = default_rho(net, costs)
    else:
        rho = np.broadcast_to(np.asarray(config.rho, dtype=float), (n_first,)).copy()
    probs = {s.id: s.probability for s in scenarios}
    order = [s.id for s in scenarios]

    state = PhaState(iteration=0, v={}, w={sid: np.zeros(n_first) for sid in order},
                     v_hat=np.zeros(n_first), residual_history=[])
    log_rows: list[dict] = []
    seen_keys: set[tuple] = set()
    prev_key: tuple | None = None
    agree_streak = np.zeros(n_bin, dtype=int)
    fixed_bins: dict[int, float] = {}
    if fixed_hardening:
        positions = {l.id: pos for pos, l in enumerate(net.corridors)}
        for cid, val in fixed_hardening.items():
            fixed_bins[positions[cid]] = float(val)

    def solve_round(first: bool) -> tuple[dict[int, PlanSolution] | None, list[int], dict[int, float]]:
        problems = {}
        for s in scenarios:
            prob = build_subproblem(
                net, s, horizon, costs, budgets,
                w=None if first else state.w[s.id],
                v_hat=None if first else state.v_hat,
                rho=0.0 if first else rho,
                per_step_modes=per_step_modes,
            )
            if fixed_bins:
                lo = prob.col_lower.copy()
                hi = prob.col_upper.copy()
                for pos, val in fixed_bins.items():
                    j = prob.index.col("x", net.corridors[pos].id)
                    lo[j] = hi[j] = val
                prob = prob.with_col_bounds(lo, hi)
            problems[s.id] = prob
        results = _solve_many(problems, config.solve_options, config.threads)
        bad = [sid for sid in order if not results[sid].ok]
        if bad:
            return None, bad, {}
        plans = {sid: decode_solution(problems[sid], results[sid].x) for sid in order}
        objectives = {sid: results[sid].objective for sid in order}
        return plans, [], objectives

    status = "max_iterations"
    infeasible: list[int] = []
    for k in range(config.max_iterations + 1):
        state.iteration = k
        plans, bad, objectives = solve_round(first=(k == 0))
        if bad:
            status = "infeasible"
            infeasible = bad
            break
        for sid in order:
            state.v[sid] = _first_stage_vector(net, plans[sid])
        state.v_hat = aggregate([state.v[sid] for sid in order],
                                [probs[sid] for sid in order])
        res_k = residual([state.v[sid] for sid in order],
                         state.v_hat, [probs[sid] for sid in order])
        state.residual_history.append(res_k)
        log_rows.append({
            "iteration": k,
            "residual": res_k,
            "min_objective": min(objectives.values()),
            "max_objective": max(objectives.values()),
            "consensus_objective": "",
        })
        if res_k <= config.epsilon:
            status = "converged"
            break

        key = tuple(sorted(_round_key(state.v[sid], n_bin) for sid in order))
        if key in seen_keys and key != prev_key:
            # recurrence of an earlier iterate after leaving it: a true orbit.
            # A consecutive repeat is just the multiplier ramp and may continue.
            status = "cycling"
            break
        seen_keys.add(key)
        prev_key = key

        for sid in order:
            state.w[sid] = update_multipliers(state.w[sid], state.v[sid],
                                              state.v_hat, rho)
        mean_w = aggregate([state.w[sid] for sid in order],
                           [probs[sid] for sid in order])
        if np.abs(mean_w).max() > 1e-9:
            raise AssertionError("multiplier mean drifted away from zero")
        for sid in order:
            state.w[sid] = state.w[sid] - mean_w  # stop drift from compounding

        if config.enable_fixing and n_bin:
            rounded = np.stack([np.round(state.v[sid][:n_bin]) for sid in order])
            agrees = (rounded == rounded[0]).all(axis=0)
            agree_streak = np.where(agrees, agree_streak + 1, 0)
            for pos in np.flatnonzero(agree_streak >= config.fix_after_k):
                fixed_bins.setdefault(int(pos), float(rounded[0][pos]))

    if status == "infeasible":
        outcome = PhaOutcome(
            status=status, consensus=None, hardening=None, storage_mwh=None,
            true_cost=None, infeasible_scenarios=infeasible,
            residual_trace=state.residual_history, iterations=state.iteration,
            state=state, log_rows=log_rows,
        )
        _write_log(config.log_path, log_rows)
        return outcome

    consensus = _consensus_vector(net, state, probs)
    true_cost, plans, bad = evaluate_first_stage(
        net, scenarios, horizon, costs, budgets, consensus,
        solve_options=config.solve_options, threads=config.threads,
        per_step_modes=per_step_modes,
    )
    if log_rows and true_cost is not None:
        log_rows[-1]["consensus_objective"] = true_cost
    if true_cost is not None:
        state.incumbent_v = consensus
        state.incumbent_cost = true_cost
    outcome = PhaOutcome(
        status=status,
        consensus=consensus,
        hardening={l.id: int(consensus[pos]) for pos, l in enumerate(net.corridors)},
        storage_mwh={st.bus: float(consensus[n_bin + pos])
                     for pos, st in enumerate(net.storage_sites)},
        true_cost=true_cost,
        infeasible_scenarios=bad,
        residual_trace=state.residual_history,
        iterations=state.iteration,
        state=state,
        log_rows=log_rows,
        scenario_plans=plans if plans else None,
    )
    _write_log(config.log_path, log_rows)
    return outcome


def _write_log(path: str | Path | None, rows: list[dict]) -> None:
    if path is None:
        return
    fields = ["iteration", "residual", "min_objective", "max_objective",
              "consensus_objective"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
