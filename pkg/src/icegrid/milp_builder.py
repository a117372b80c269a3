"""Two-stage resilience planning model assembly.

Builds the extensive form (all scenarios with shared first-stage hardening
and storage-sizing columns) and penalized single-scenario subproblems for
progressive hedging, as sparse MILPs in MW/MWh/$ units.

Conventions:
  * DC flow on corridor l is a single column f = base_mva * b_pu * (th_i -
    th_j), bounded by the thermal limit; angles are bounded by theta_max with
    the lowest-id bus pinned to 0 per scenario/step.
  * Damage enters through mu = phi_o - (phi_o - phi_w) * x_l, which is affine
    in the hardening decision: flow-kill and big-M flow-definition rows carry
    x_l only where hardening changes the outcome (phi_o=1, phi_w=0); corridors
    dead either way get their flow column pinned to zero, and intact ones keep
    the plain flow equality.
  * Storage charging consumes bus power and discharging supplies it, and the
    state of charge follows the energy-conserving update
    S_t = S_{t-1} + eta_ch * P_ch - P_dis / eta_dis.
  * Preventive shedding is free in the pre-awareness window only because its
    columns are pinned to zero there; during the preparation window it is
    priced by the time-varying penalty, during the storm by the emergency
    penalty, both doubled on critical buses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .grid_model import Network
from .predictive import Horizon, PenaltySchedule
from .problem import MilpProblem, VariableIndex
from .scenario import Scenario

__all__ = [
    "CostConfig",
    "BudgetConfig",
    "PlanSolution",
    "capital_recovery_factor",
    "storage_daily_capital",
    "build_extensive",
    "build_subproblem",
    "decode_solution",
    "audit_solution",
]


@dataclass(frozen=True)
class CostConfig:
    """Operating and investment cost parameters ($, MWh, hours)."""

    gen_override: float | None = None   # flat $/MWh for every generator if set
    dis: float = 5.0                    # storage discharge cost, normal periods
    wind_curtail: float = 500.0
    shed_emergency: float = 2000.0
    critical_multiplier: float = 2.0
    discount_rate: float = 0.05
    lifetime_years: int = 10
    theta_max_rad: float = 0.6
    s0_frac: float = 0.0                # initial SOC as a fraction of Z
    penalty: PenaltySchedule = field(default_factory=PenaltySchedule)


@dataclass(frozen=True)
class BudgetConfig:
    lines: float = math.inf
    storage: float = math.inf

    def __post_init__(self) -> None:
        if self.lines < 0 or self.storage < 0:
            raise ValueError("budgets must be nonnegative")


def capital_recovery_factor(rate: float, years: int) -> float:
    growth = (1.0 + rate) ** years
    return rate * growth / (growth - 1.0)


def storage_daily_capital(site, costs: CostConfig) -> float:
    """$ per MWh of installed energy per day, pro-rated by net present value.

    Capital = energy cost + power cost on the derived rating Z/rho, annualised
    by the capital recovery factor and spread over 365 days.
    """
    per_mwh = (site.energy_cost_per_kwh + site.power_cost_per_kw / site.ep_ratio_h) * 1000.0
    crf = capital_recovery_factor(costs.discount_rate, costs.lifetime_years)
    return per_mwh * crf / 365.0


def _shed_multiplier(bus, costs: CostConfig) -> float:
    return costs.critical_multiplier if bus.critical else 1.0


class _Rows:
    """COO accumulator for tagged two-sided rows."""

    def __init__(self) -> None:
        self.data: list[float] = []
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.tags: list[tuple] = []

    def add(self, entries: Sequence[tuple[int, float]], lower: float,
            upper: float, tag: tuple) -> None:
        r = len(self.lower)
        for col, val in entries:
            if val != 0.0:
                self.rows.append(r)
                self.cols.append(col)
                self.data.append(val)
        self.lower.append(lower)
        self.upper.append(upper)
        self.tags.append(tag)

    def matrix(self, n_cols: int) -> sp.csr_matrix:
        return sp.coo_matrix(
            (self.data, (self.rows, self.cols)), shape=(len(self.lower), n_cols)
        ).tocsr()


def _check_inputs(net: Network, scenarios: Sequence[Scenario], horizon: Horizon) -> None:
    if not scenarios:
        raise ValueError("at least one scenario is required")
    for s in scenarios:
        if s.damage.total_steps != horizon.total:
            raise ValueError(
                f"scenario {s.id} spans {s.damage.total_steps} steps, "
                f"horizon needs {horizon.total}"
            )
        for bus in net.buses:
            if bus.id not in s.load:
                raise ValueError(f"scenario {s.id} missing load for bus {bus.id}")
            if len(s.load[bus.id]) < horizon.total:
                raise ValueError(f"scenario {s.id} load series too short for bus {bus.id}")
        for farm in net.wind_farms:
            if farm.id not in s.wind:
                raise ValueError(f"scenario {s.id} missing wind for farm {farm.id}")


def _assemble(net: Network, scenarios: Sequence[Scenario],
              probabilities: Sequence[float], horizon: Horizon,
              costs: CostConfig, budgets: BudgetConfig,
              per_step_modes: bool,
              proximal: tuple[np.ndarray, np.ndarray, np.ndarray] | None) -> MilpProblem:
    _check_inputs(net, scenarios, horizon)
    steps = list(horizon.steps)
    normal_steps = list(horizon.t0_steps) + list(horizon.tn_steps)
    tn = set(horizon.tn_steps)
    t0 = set(horizon.t0_steps)
    te = set(horizon.te_steps)
    ref_bus = sorted(net.bus_ids)[0]
    base = net.base_mva

    idx = VariableIndex()
    idx.add_block("x", [l.id for l in net.corridors])
    idx.add_block("z", [st.bus for st in net.storage_sites])
    for s in scenarios:
        sid = s.id
        idx.add_block(f"pg|{sid}", [(g.id, t) for g in net.generators for t in steps])
        idx.add_block(f"flow|{sid}", [(l.id, t) for l in net.corridors for t in steps])
        idx.add_block(f"theta|{sid}", [(b.id, t) for b in net.buses for t in steps])
        idx.add_block(f"shed|{sid}", [(b.id, t) for b in net.buses for t in steps])
        idx.add_block(f"wc|{sid}", [(w.id, t) for w in net.wind_farms for t in steps])
        for name in ("ch", "dis", "soc"):
            idx.add_block(f"{name}|{sid}", [(st.bus, t) for st in net.storage_sites for t in steps])
        if per_step_modes:
            normal_keys = [(st.bus, t) for st in net.storage_sites for t in normal_steps]
        else:
            normal_keys = [(st.bus, 0) for st in net.storage_sites]
        idx.add_block(f"mode_ch_n|{sid}", normal_keys)
        idx.add_block(f"mode_dis_n|{sid}", normal_keys)
        e_keys = [(st.bus, t) for st in net.storage_sites for t in horizon.te_steps]
        idx.add_block(f"mode_ch_e|{sid}", e_keys)
        idx.add_block(f"mode_dis_e|{sid}", e_keys)
    if proximal is not None and net.storage_sites:
        idx.add_block("z_dev_pos", [st.bus for st in net.storage_sites])
        idx.add_block("z_dev_neg", [st.bus for st in net.storage_sites])

    n = idx.n_cols
    c = np.zeros(n)
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    integer = np.zeros(n, dtype=bool)
    offset = 0.0

    # ---- first stage ------------------------------------------------------
    for l in net.corridors:
        j = idx.col("x", l.id)
        ub[j] = 1.0
        integer[j] = True
        c[j] = l.hardening_cost
    z_cap = {}
    for st in net.storage_sites:
        j = idx.col("z", st.bus)
        ub[j] = st.z_max_mwh
        z_cap[st.bus] = storage_daily_capital(st, costs)
        c[j] = z_cap[st.bus]

    rows = _Rows()
    line_terms = [(idx.col("x", l.id), l.hardening_cost)
                  for l in net.corridors if l.hardening_cost > 0]
    if line_terms:
        rows.add(line_terms, -np.inf, budgets.lines, ("budget_lines",))
    storage_terms = [(idx.col("z", st.bus), z_cap[st.bus])
                     for st in net.storage_sites if z_cap[st.bus] > 0]
    if storage_terms:
        rows.add(storage_terms, -np.inf, budgets.storage, ("budget_storage",))

    # ---- per-scenario blocks ----------------------------------------------
    gens_at = {b.id: [g for g in net.generators if g.bus == b.id] for b in net.buses}
    farms_at = {b.id: [w for w in net.wind_farms if w.bus == b.id] for b in net.buses}
    sites_at = {b.id: [st for st in net.storage_sites if st.bus == b.id] for b in net.buses}
    flows_in = {b.id: [l for l in net.corridors if l.to_bus == b.id] for b in net.buses}
    flows_out = {b.id: [l for l in net.corridors if l.from_bus == b.id] for b in net.buses}

    for s, prob in zip(scenarios, probabilities):
        sid = s.id
        avail = {w.id: s.wind[w.id][:horizon.total] * s.damage.gamma_series(w.id)
                 for w in net.wind_farms}
        phi_o = {l.id: s.damage.phi_o_series(l.id) for l in net.corridors}
        phi_w = {l.id: s.damage.phi_w_series(l.id) for l in net.corridors}

        def mode_col(kind: str, bus: str, t: int) -> int:
            if t in te:
                return idx.col(f"mode_{kind}_e|{sid}", (bus, t))
            if per_step_modes:
                return idx.col(f"mode_{kind}_n|{sid}", (bus, t))
            return idx.col(f"mode_{kind}_n|{sid}", (bus, 0))

        # column bounds and objective
        for g in net.generators:
            rate = costs.gen_override if costs.gen_override is not None else g.cost_per_mwh
            for t in steps:
                j = idx.col(f"pg|{sid}", (g.id, t))
                lb[j], ub[j] = g.pmin_mw, g.pmax_mw
                if t not in te:
                    c[j] = prob * rate
        for l in net.corridors:
            for t in steps:
                j = idx.col(f"flow|{sid}", (l.id, t))
                dead = t in te and phi_o[l.id][t - 1] == 1.0 and phi_w[l.id][t - 1] == 1.0
                if dead:
                    lb[j] = ub[j] = 0.0
                else:
                    lb[j], ub[j] = -l.pmax_mw, l.pmax_mw
        for b in net.buses:
            load = s.load[b.id]
            mult = _shed_multiplier(b, costs)
            for t in steps:
                jt = idx.col(f"theta|{sid}", (b.id, t))
                if b.id == ref_bus:
                    lb[jt] = ub[jt] = 0.0
                else:
                    lb[jt], ub[jt] = -costs.theta_max_rad, costs.theta_max_rad
                j = idx.col(f"shed|{sid}", (b.id, t))
                if t in t0:
                    lb[j] = ub[j] = 0.0
                elif t in tn:
                    ub[j] = b.alpha * load[t - 1]
                    c[j] = prob * costs.penalty.penalty_at(horizon.tau_of(t)) * mult
                else:
                    ub[j] = b.beta * load[t - 1]
                    c[j] = prob * costs.shed_emergency * mult
        for w in net.wind_farms:
            for t in steps:
                j = idx.col(f"wc|{sid}", (w.id, t))
                ub[j] = avail[w.id][t - 1]
                if t not in te:
                    c[j] = prob * costs.wind_curtail
        for st in net.storage_sites:
            p_cap = st.z_max_mwh / st.ep_ratio_h
            for t in steps:
                jc = idx.col(f"ch|{sid}", (st.bus, t))
                jd = idx.col(f"dis|{sid}", (st.bus, t))
                js = idx.col(f"soc|{sid}", (st.bus, t))
                ub[jc] = ub[jd] = p_cap
                ub[js] = st.z_max_mwh
                if t not in te:
                    c[jd] += prob * costs.dis
        for name in ("mode_ch_n", "mode_dis_n", "mode_ch_e", "mode_dis_e"):
            lo_col, hi_col = idx.block(f"{name}|{sid}")
            ub[lo_col:hi_col] = 1.0
            integer[lo_col:hi_col] = True

        # power balance, one equality per bus and step
        for b in net.buses:
            for t in steps:
                entries = [(idx.col(f"pg|{sid}", (g.id, t)), 1.0) for g in gens_at[b.id]]
                entries += [(idx.col(f"flow|{sid}", (l.id, t)), 1.0) for l in flows_in[b.id]]
                entries += [(idx.col(f"flow|{sid}", (l.id, t)), -1.0) for l in flows_out[b.id]]
                entries.append((idx.col(f"shed|{sid}", (b.id, t)), 1.0))
                entries += [(idx.col(f"wc|{sid}", (w.id, t)), -1.0) for w in farms_at[b.id]]
                for st in sites_at[b.id]:
                    entries.append((idx.col(f"dis|{sid}", (st.bus, t)), 1.0))
                    entries.append((idx.col(f"ch|{sid}", (st.bus, t)), -1.0))
                rhs = s.load[b.id][t - 1] - sum(avail[w.id][t - 1] for w in farms_at[b.id])
                rows.add(entries, rhs, rhs, ("balance", sid, b.id, t))

        # flow definition and damage logic
        for l in net.corridors:
            k = base * l.b_pu
            big_m = k * 2.0 * costs.theta_max_rad
            jx = idx.col("x", l.id)
            for t in steps:
                jf = idx.col(f"flow|{sid}", (l.id, t))
                ji = idx.col(f"theta|{sid}", (l.from_bus, t))
                jj = idx.col(f"theta|{sid}", (l.to_bus, t))
                if t not in te:
                    rows.add([(jf, 1.0), (ji, -k), (jj, k)], 0.0, 0.0,
                             ("flow_def", sid, l.id, t))
                    continue
                po = phi_o[l.id][t - 1]
                pw = phi_w[l.id][t - 1]
                if po == pw:
                    if po == 0.0:
                        rows.add([(jf, 1.0), (ji, -k), (jj, k)], 0.0, 0.0,
                                 ("flow_def", sid, l.id, t))
                    # both variants dead: flow column already pinned to zero
                    continue
                # hardening decides survival: mu = 1 - x
                rows.add([(jf, 1.0), (ji, -k), (jj, k), (jx, big_m)], -np.inf, big_m,
                         ("flow_def_hi", sid, l.id, t))
                rows.add([(jf, 1.0), (ji, -k), (jj, k), (jx, -big_m)], -big_m, np.inf,
                         ("flow_def_lo", sid, l.id, t))
                rows.add([(jf, 1.0), (jx, -l.pmax_mw)], -np.inf, 0.0,
                         ("flow_kill_hi", sid, l.id, t))
                rows.add([(jf, 1.0), (jx, l.pmax_mw)], 0.0, np.inf,
                         ("flow_kill_lo", sid, l.id, t))

        # storage dynamics, capacity link, rating, and modes
        for st in net.storage_sites:
            jz = idx.col("z", st.bus)
            p_scale = 1.0 / st.ep_ratio_h
            mode_cap = st.z_max_mwh / st.ep_ratio_h
            for t in steps:
                jc = idx.col(f"ch|{sid}", (st.bus, t))
                jd = idx.col(f"dis|{sid}", (st.bus, t))
                js = idx.col(f"soc|{sid}", (st.bus, t))
                soc_entries = [(js, 1.0), (jc, -st.eta_charge), (jd, 1.0 / st.eta_discharge)]
                if t > 1:
                    soc_entries.append((idx.col(f"soc|{sid}", (st.bus, t - 1)), -1.0))
                elif costs.s0_frac:
                    soc_entries.append((jz, -costs.s0_frac))
                rows.add(soc_entries, 0.0, 0.0, ("soc", sid, st.bus, t))
                rows.add([(js, 1.0), (jz, -1.0)], -np.inf, 0.0, ("soc_cap", sid, st.bus, t))
                rows.add([(jc, 1.0), (jz, -p_scale)], -np.inf, 0.0,
                         ("rate_ch", sid, st.bus, t))
                rows.add([(jd, 1.0), (jz, -p_scale)], -np.inf, 0.0,
                         ("rate_dis", sid, st.bus, t))
                rows.add([(jc, 1.0), (mode_col("ch", st.bus, t), -mode_cap)], -np.inf, 0.0,
                         ("mode_ch", sid, st.bus, t))
                rows.add([(jd, 1.0), (mode_col("dis", st.bus, t), -mode_cap)], -np.inf, 0.0,
                         ("mode_dis", sid, st.bus, t))
            # charge/discharge exclusivity per registered binary pair
            if per_step_modes:
                for t in normal_steps:
                    rows.add([(idx.col(f"mode_ch_n|{sid}", (st.bus, t)), 1.0),
                              (idx.col(f"mode_dis_n|{sid}", (st.bus, t)), 1.0)],
                             -np.inf, 1.0, ("mode_excl_n", sid, st.bus, t))
            elif normal_steps:
                rows.add([(idx.col(f"mode_ch_n|{sid}", (st.bus, 0)), 1.0),
                          (idx.col(f"mode_dis_n|{sid}", (st.bus, 0)), 1.0)],
                         -np.inf, 1.0, ("mode_excl_n", sid, st.bus, 0))
            for t in horizon.te_steps:
                rows.add([(idx.col(f"mode_ch_e|{sid}", (st.bus, t)), 1.0),
                          (idx.col(f"mode_dis_e|{sid}", (st.bus, t)), 1.0)],
                         -np.inf, 1.0, ("mode_excl_e", sid, st.bus, t))

    # ---- progressive-hedging penalty --------------------------------------
    meta_prox = None
    if proximal is not None:
        w_vec, v_hat, rho_vec = proximal
        n_first = len(net.corridors) + len(net.storage_sites)
        w_vec = np.asarray(w_vec, dtype=float)
        v_hat = np.asarray(v_hat, dtype=float)
        rho_vec = np.broadcast_to(np.asarray(rho_vec, dtype=float), (n_first,)).copy()
        if w_vec.shape != (n_first,) or v_hat.shape != (n_first,):
            raise ValueError("multiplier and anchor must match the first-stage length")
        for pos, l in enumerate(net.corridors):
            j = idx.col("x", l.id)
            # w*x + rho/2*(x - 2*vhat*x + vhat^2): exact since x^2 = x
            c[j] += w_vec[pos] + 0.5 * rho_vec[pos] * (1.0 - 2.0 * v_hat[pos])
            offset += 0.5 * rho_vec[pos] * v_hat[pos] ** 2
        for pos, st in enumerate(net.storage_sites):
            k = len(net.corridors) + pos
            j = idx.col("z", st.bus)
            c[j] += w_vec[k]
            jp = idx.col("z_dev_pos", st.bus)
            jm = idx.col("z_dev_neg", st.bus)
            c[jp] = 0.5 * rho_vec[k]
            c[jm] = 0.5 * rho_vec[k]
            rows.add([(j, 1.0), (jp, -1.0), (jm, 1.0)], v_hat[k], v_hat[k],
                     ("z_anchor", st.bus))
        meta_prox = {"w": w_vec, "v_hat": v_hat, "rho": rho_vec}

    problem = MilpProblem(
        c=c,
        a_matrix=rows.matrix(n),
        row_lower=np.array(rows.lower),
        row_upper=np.array(rows.upper),
        col_lower=lb,
        col_upper=ub,
        integer=integer,
        offset=offset,
        index=idx,
        row_tags=rows.tags,
        meta={
            "net": net,
            "scenarios": tuple(scenarios),
            "probabilities": tuple(float(p) for p in probabilities),
            "horizon": horizon,
            "costs": costs,
            "budgets": budgets,
            "per_step_modes": per_step_modes,
            "proximal": meta_prox,
            "ref_bus": ref_bus,
        },
    )
    return problem


def build_extensive(net: Network, scenarios: Sequence[Scenario], horizon: Horizon,
                    costs: CostConfig | None = None,
                    budgets: BudgetConfig | None = None,
                    per_step_modes: bool = False) -> MilpProblem:
    """Deterministic equivalent over all scenarios with shared first stage."""
    costs = costs or CostConfig()
    budgets = budgets or BudgetConfig()
    probs = [s.probability for s in scenarios]
    total = sum(probs)
    if scenarios and abs(total - 1.0) > 1e-6:
        raise ValueError(f"scenario probabilities sum to {total}, not 1")
    return _assemble(net, list(scenarios), probs, horizon, costs, budgets,
                     per_step_modes, proximal=None)


def build_subproblem(net: Network, scenario: Scenario, horizon: Horizon,
                     costs: CostConfig | None = None,
                     budgets: BudgetConfig | None = None,
                     w: np.ndarray | None = None,
                     v_hat: np.ndarray | None = None,
                     rho: float | np.ndarray = 0.0,
                     per_step_modes: bool = False) -> MilpProblem:
    """Single-scenario problem with multiplier and proximal terms on the
    first stage (hardening binaries exactly, storage size via absolute
    deviation columns)."""
    costs = costs or CostConfig()
    budgets = budgets or BudgetConfig()
    n_first = len(net.corridors) + len(net.storage_sites)
    w_vec = np.zeros(n_first) if w is None else np.asarray(w, dtype=float)
    anchor = np.zeros(n_first) if v_hat is None else np.asarray(v_hat, dtype=float)
    return _assemble(net, [scenario], [1.0], horizon, costs, budgets,
                     per_step_modes, proximal=(w_vec, anchor, rho))


# ------------------------------------------------------------------ decoding

@dataclass
class PlanSolution:
    """Decoded plan: first-stage decisions, schedules, and recomputed costs."""

    hardening: dict[str, int]
    storage_mwh: dict[str, float]
    schedules: dict[int, dict[str, dict[str, np.ndarray]]]
    investment_cost: float
    psi_normal: dict[int, float]
    psi_emergency: dict[int, float]
    expected_cost: float
    proximal_cost: float
    objective: float

    @property
    def first_stage(self) -> np.ndarray:
        return np.array(list(map(float, self.hardening.values()))
                        + list(self.storage_mwh.values()))


def _block_series(idx: VariableIndex, x: np.ndarray, name: str, obj_id: str,
                  steps: Sequence[int]) -> np.ndarray:
    return np.array([x[idx.col(name, (obj_id, t))] for t in steps])


def decode_solution(problem: MilpProblem, x: np.ndarray) -> PlanSolution:
    """Expand raw column values into schedules and recompute the cost split.

    The recomputed total is asserted against the solver objective; binaries
    must be integral within 1e-6.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n_cols,):
        raise ValueError(f"solution has {x.shape} entries, problem has {problem.n_cols} columns")
    int_err = np.abs(x[problem.integer] - np.round(x[problem.integer]))
    if int_err.size and int_err.max() > 1e-6:
        raise ValueError(f"integrality violated by {int_err.max():.3e}")

    idx = problem.index
    meta = problem.meta
    net: Network = meta["net"]
    horizon: Horizon = meta["horizon"]
    costs: CostConfig = meta["costs"]
    steps = list(horizon.steps)
    tn = set(horizon.tn_steps)
    te = set(horizon.te_steps)

    hardening = {l.id: int(round(x[idx.col("x", l.id)])) for l in net.corridors}
    storage = {st.bus: float(x[idx.col("z", st.bus)]) for st in net.storage_sites}
    investment = sum(l.hardening_cost * hardening[l.id] for l in net.corridors)
    investment += sum(storage_daily_capital(st, costs) * storage[st.bus]
                      for st in net.storage_sites)

    schedules: dict[int, dict[str, dict[str, np.ndarray]]] = {}
    psi_n: dict[int, float] = {}
    psi_e: dict[int, float] = {}
    for s in meta["scenarios"]:
        sid = s.id
        sched = {
            "gen": {g.id: _block_series(idx, x, f"pg|{sid}", g.id, steps)
                    for g in net.generators},
            "flow": {l.id: _block_series(idx, x, f"flow|{sid}", l.id, steps)
                     for l in net.corridors},
            "theta": {b.id: _block_series(idx, x, f"theta|{sid}", b.id, steps)
                      for b in net.buses},
            "shed": {b.id: _block_series(idx, x, f"shed|{sid}", b.id, steps)
                     for b in net.buses},
            "wind_curtail": {w.id: _block_series(idx, x, f"wc|{sid}", w.id, steps)
                             for w in net.wind_farms},
            "charge": {st.bus: _block_series(idx, x, f"ch|{sid}", st.bus, steps)
                       for st in net.storage_sites},
            "discharge": {st.bus: _block_series(idx, x, f"dis|{sid}", st.bus, steps)
                          for st in net.storage_sites},
            "soc": {st.bus: _block_series(idx, x, f"soc|{sid}", st.bus, steps)
                    for st in net.storage_sites},
        }
        schedules[sid] = sched

        cost_n = 0.0
        cost_e = 0.0
        for g in net.generators:
            rate = costs.gen_override if costs.gen_override is not None else g.cost_per_mwh
            cost_n += rate * sum(sched["gen"][g.id][t - 1] for t in steps if t not in te)
        for st in net.storage_sites:
            cost_n += costs.dis * sum(sched["discharge"][st.bus][t - 1]
                                      for t in steps if t not in te)
        for w in net.wind_farms:
            cost_n += costs.wind_curtail * sum(sched["wind_curtail"][w.id][t - 1]
                                               for t in steps if t not in te)
        for b in net.buses:
            mult = _shed_multiplier(b, costs)
            shed = sched["shed"][b.id]
            for t in steps:
                if t in tn:
                    cost_n += costs.penalty.penalty_at(horizon.tau_of(t)) * mult * shed[t - 1]
                elif t in te:
                    cost_e += costs.shed_emergency * mult * shed[t - 1]
        psi_n[sid] = cost_n
        psi_e[sid] = cost_e

    expected = investment + sum(
        p * (psi_n[s.id] + psi_e[s.id])
        for s, p in zip(meta["scenarios"], meta["probabilities"])
    )

    prox_cost = 0.0
    if meta.get("proximal") is not None:
        prox = meta["proximal"]
        v = np.array([float(hardening[l.id]) for l in net.corridors]
                     + [storage[st.bus] for st in net.storage_sites])
        prox_cost = float(prox["w"] @ v)
        nl = len(net.corridors)
        prox_cost += float(0.5 * prox["rho"][:nl] @ (v[:nl] - prox["v_hat"][:nl]) ** 2)
        prox_cost += float(0.5 * prox["rho"][nl:] @ np.abs(v[nl:] - prox["v_hat"][nl:]))

    objective = float(problem.c @ x + problem.offset)
    recomputed = expected + prox_cost
    if abs(recomputed - objective) > 1e-6 * max(1.0, abs(objective)):
        raise ValueError(
            f"cost split {recomputed:.6f} disagrees with objective {objective:.6f}"
        )
    return PlanSolution(
        hardening=hardening,
        storage_mwh=storage,
        schedules=schedules,
        investment_cost=float(investment),
        psi_normal=psi_n,
        psi_emergency=psi_e,
        expected_cost=float(expected),
        proximal_cost=float(prox_cost),
        objective=objective,
    )


def audit_solution(problem: MilpProblem, x: np.ndarray) -> dict:
    """Physical feasibility report: balance residual (pu), SOC window and
    dynamics, charge/discharge overlap, and flow on damaged corridors."""
    plan = decode_solution(problem, x)
    meta = problem.meta
    net: Network = meta["net"]
    horizon: Horizon = meta["horizon"]
    costs: CostConfig = meta["costs"]
    steps = list(horizon.steps)
    te = set(horizon.te_steps)
    base = net.base_mva

    worst_balance = 0.0
    worst_soc_window = 0.0
    worst_soc_chain = 0.0
    worst_overlap = 0.0
    worst_dead_flow = 0.0
    for s in meta["scenarios"]:
        sched = plan.schedules[s.id]
        avail = {w.id: s.wind[w.id][:horizon.total] * s.damage.gamma_series(w.id)
                 for w in net.wind_farms}
        for b in net.buses:
            for t in steps:
                k = t - 1
                inj = sum(sched["gen"][g.id][k] for g in net.generators if g.bus == b.id)
                inj += sum(sched["flow"][l.id][k] for l in net.corridors if l.to_bus == b.id)
                inj -= sum(sched["flow"][l.id][k] for l in net.corridors if l.from_bus == b.id)
                inj += sched["shed"][b.id][k]
                inj += sum(avail[w.id][k] - sched["wind_curtail"][w.id][k]
                           for w in net.wind_farms if w.bus == b.id)
                for st in net.storage_sites:
                    if st.bus == b.id:
                        inj += sched["discharge"][st.bus][k] - sched["charge"][st.bus][k]
                worst_balance = max(worst_balance, abs(inj - s.load[b.id][k]) / base)
        for st in net.storage_sites:
            z_val = plan.storage_mwh[st.bus]
            soc = sched["soc"][st.bus]
            prev = costs.s0_frac * z_val
            for t in steps:
                k = t - 1
                worst_soc_window = max(worst_soc_window, soc[k] - z_val, -soc[k])
                aim = prev + st.eta_charge * sched["charge"][st.bus][k] \
                    - sched["discharge"][st.bus][k] / st.eta_discharge
                worst_soc_chain = max(worst_soc_chain, abs(soc[k] - aim))
                prev = soc[k]
                worst_overlap = max(
                    worst_overlap,
                    min(sched["charge"][st.bus][k], sched["discharge"][st.bus][k]),
                )
        for l in net.corridors:
            po = s.damage.phi_o_series(l.id)
            pw = s.damage.phi_w_series(l.id)
            xl = plan.hardening[l.id]
            for t in steps:
                if t not in te:
                    continue
                mu = po[t - 1] - (po[t - 1] - pw[t - 1]) * xl
                if mu == 1.0:
                    worst_dead_flow = max(worst_dead_flow, abs(sched["flow"][l.id][t - 1]))
    return {
        "max_balance_residual_pu": float(worst_balance),
        "max_soc_window_violation": float(worst_soc_window),
        "max_soc_chain_error": float(worst_soc_chain),
        "max_charge_discharge_overlap": float(worst_overlap),
        "max_flow_on_dead_corridor": float(worst_dead_flow),
    }
