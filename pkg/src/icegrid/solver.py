"""LP and MILP solver: bounded-variable revised simplex plus branch and bound.

The simplex works on the slack-augmented equality system [A | -I] z = 0 where
structural columns keep their bounds and slack columns carry the row bounds.
Phase 1 minimises the sum of bound violations of the basic variables (no
artificial columns), which also makes warm starts from an arbitrary basis
cheap; phase 2 minimises the true objective. The basis inverse is held dense
and updated with elementary row operations, with periodic refactorisation.
Pricing is Dantzig (largest violation, lowest index on ties) with a Bland
fallback when progress stalls.

Branch and bound uses best-bound node selection and most-fractional
branching; the simplex core is built once and each node warm-starts from its
parent's final basis. Statuses are honest: "optimal" means the tree was
exhausted, "gap_limit" means the relative gap target was met with nodes
outstanding.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .problem import MilpProblem

__all__ = ["SolveOptions", "SolveResult", "solve_lp", "solve_milp", "check_solution"]

_BASIC = 0
_AT_LOWER = 1
_AT_UPPER = 2
_FREE = 3

_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 120
_STALL_LIMIT = 600
_REPAIR_EVERY = 10


class _NumericalBreakdown(Exception):
    pass


@dataclass(frozen=True)
class SolveOptions:
    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-7
    integrality_tol: float = 1e-6
    relative_mip_gap: float = 1e-4
    node_limit: int = 200_000
    time_limit: float | None = None
    iteration_limit: int | None = None
    scale: bool = True


@dataclass
class SolveResult:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    best_bound: float | None = None
    gap: float | None = None
    iterations: int = 0
    nodes: int = 0
    message: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "gap_limit")


def check_solution(problem: MilpProblem, x: np.ndarray, tol: float = 1e-6) -> dict:
    """Residual audit of a candidate point against rows, bounds, integrality."""
    x = np.asarray(x, dtype=float)
    ax = problem.a_matrix @ x if problem.n_rows else np.zeros(0)
    row_viol = np.maximum(problem.row_lower - ax, ax - problem.row_upper)
    bound_viol = np.maximum(problem.col_lower - x, x - problem.col_upper)
    if problem.integer.any():
        vals = x[problem.integer]
        int_viol = np.abs(vals - np.round(vals))
    else:
        int_viol = np.zeros(0)
    report = {
        "max_row_violation": float(row_viol.max(initial=0.0)),
        "max_bound_violation": float(bound_viol.max(initial=0.0)),
        "max_integrality_violation": float(int_viol.max(initial=0.0)),
        "objective": float(problem.c @ x + problem.offset),
    }
    report["feasible"] = (
        report["max_row_violation"] <= tol
        and report["max_bound_violation"] <= tol
        and report["max_integrality_violation"] <= tol
    )
    return report


def _equilibrate(a_csc: sp.csc_matrix) -> tuple[np.ndarray, np.ndarray]:
    """One pass of row then column max-abs scaling; returns (row, col) factors."""
    m, n = a_csc.shape
    row_scale = np.ones(m)
    col_scale = np.ones(n)
    if a_csc.nnz == 0:
        return row_scale, col_scale
    abs_a = sp.csc_matrix((np.abs(a_csc.data), a_csc.indices, a_csc.indptr), shape=a_csc.shape)
    row_max = np.asarray(abs_a.max(axis=1).todense()).ravel()
    nz = row_max > 0
    row_scale[nz] = 1.0 / row_max[nz]
    scaled = sp.diags(row_scale) @ abs_a
    col_max = np.asarray(scaled.max(axis=0).todense()).ravel()
    nz = col_max > 0
    col_scale[nz] = 1.0 / col_max[nz]
    return row_scale, col_scale


class _Simplex:
    """Revised simplex over [A | -I] z = 0 with individual bounds on z.

    The matrix is fixed at construction; bounds are supplied per solve via
    load(), optionally with a starting basis, so branch-and-bound nodes reuse
    one core.
    """

    def __init__(self, a_csc: sp.csc_matrix, c: np.ndarray, options: SolveOptions):
        self.m, self.n = a_csc.shape
        self.total = self.n + self.m
        if self.m:
            self.aug = sp.hstack([a_csc, -sp.identity(self.m, format="csc")], format="csc")
        else:
            self.aug = a_csc.tocsc()
        self.aug_t = self.aug.T.tocsr()
        self.c = np.concatenate([c, np.zeros(self.m)])
        self.opt = options
        self.iterations = 0
        self.lb = np.zeros(self.total)
        self.ub = np.zeros(self.total)
        self.x = np.zeros(self.total)
        self.vstat = np.full(self.total, _AT_LOWER, dtype=np.int8)
        self.basis = np.arange(self.n, self.n + self.m)
        self.b_inv = -np.eye(self.m)
        self._pivots_since_refactor = 0

    def _column(self, q: int) -> np.ndarray:
        start, end = self.aug.indptr[q], self.aug.indptr[q + 1]
        idx = self.aug.indices[start:end]
        vals = self.aug.data[start:end]
        if self.m == 0:
            return np.zeros(0)
        return self.b_inv[:, idx] @ vals

    # -- setup -------------------------------------------------------------

    def _start_nonbasic_value(self, j: int) -> tuple[float, int]:
        lo, hi = self.lb[j], self.ub[j]
        if np.isinf(lo) and np.isinf(hi):
            return 0.0, _FREE
        if np.isinf(lo):
            return hi, _AT_UPPER
        if np.isinf(hi):
            return lo, _AT_LOWER
        if abs(lo) <= abs(hi):
            return lo, _AT_LOWER
        return hi, _AT_UPPER

    def load(self, lower: np.ndarray, upper: np.ndarray,
             start: tuple[np.ndarray, np.ndarray] | None = None) -> None:
        """Install bounds and either a slack basis or a caller-provided one."""
        self.lb = lower
        self.ub = upper
        self.iterations = 0
        if start is None:
            self.basis = np.arange(self.n, self.n + self.m)
            self.vstat = np.full(self.total, _AT_LOWER, dtype=np.int8)
            for j in range(self.n):
                val, stat = self._start_nonbasic_value(j)
                self.x[j] = val
                self.vstat[j] = stat
            self.vstat[self.n:] = _BASIC
            self.b_inv = -np.eye(self.m)
            self._pivots_since_refactor = 0
            self._recompute_basics()
            return
        self.basis = start[0].copy()
        self.vstat = start[1].copy()
        nonbasic = np.flatnonzero(self.vstat != _BASIC)
        for j in nonbasic:
            if self.vstat[j] == _AT_LOWER:
                self.x[j] = self.lb[j] if np.isfinite(self.lb[j]) else 0.0
            elif self.vstat[j] == _AT_UPPER:
                self.x[j] = self.ub[j] if np.isfinite(self.ub[j]) else 0.0
            else:
                self.x[j] = 0.0
        self._refactor()

    def snapshot(self) -> tuple[np.ndarray, np.ndarray]:
        return self.basis.copy(), self.vstat.copy()

    def _recompute_basics(self) -> None:
        if self.m == 0:
            return
        x_nb = self.x.copy()
        x_nb[self.basis] = 0.0
        rhs = -(self.aug @ x_nb)
        self.x[self.basis] = self.b_inv @ rhs

    def _refactor(self) -> None:
        if self.m == 0:
            return
        dense = self.aug[:, self.basis].toarray()
        try:
            self.b_inv = np.linalg.inv(dense)
        except np.linalg.LinAlgError as exc:
            raise _NumericalBreakdown("singular basis during refactorisation") from exc
        self._pivots_since_refactor = 0
        self._recompute_basics()

    # -- phase machinery ---------------------------------------------------

    def _violations(self) -> tuple[np.ndarray, np.ndarray]:
        xb = self.x[self.basis]
        below = np.maximum(self.lb[self.basis] - xb, 0.0)
        above = np.maximum(xb - self.ub[self.basis], 0.0)
        return below, above

    def _max_infeasibility(self) -> float:
        if self.m == 0:
            return 0.0
        below, above = self._violations()
        return float(max(below.max(initial=0.0), above.max(initial=0.0)))

    def _phase1_costs(self) -> np.ndarray:
        below, above = self._violations()
        tol = self.opt.feasibility_tol
        g = np.zeros(self.m)
        g[below > tol] = -1.0
        g[above > tol] = 1.0
        return g

    def _reduced_costs(self, g_basic: np.ndarray | None) -> np.ndarray:
        """Phase-1 costs when g_basic is given, else true reduced costs."""
        if self.m == 0:
            d = self.c.copy()
        elif g_basic is None:
            y = self.b_inv.T @ self.c[self.basis]
            d = self.c - (self.aug_t @ y)
        else:
            y = self.b_inv.T @ g_basic
            d = -(self.aug_t @ y)
        d[self.basis] = 0.0
        return d

    def _choose_entering(self, d: np.ndarray, bland: bool) -> int:
        stat = self.vstat
        tol = self.opt.optimality_tol
        movable = self.ub > self.lb
        can_up = ((stat == _AT_LOWER) | (stat == _FREE)) & (d < -tol) & movable
        can_down = ((stat == _AT_UPPER) | (stat == _FREE)) & (d > tol) & movable
        eligible = can_up | can_down
        if not eligible.any():
            return -1
        if bland:
            return int(np.flatnonzero(eligible)[0])
        score = np.where(eligible, np.abs(d), -1.0)
        return int(np.argmax(score))

    def _ratio_test(self, q: int, sigma: float, w: np.ndarray, phase1: bool
                    ) -> tuple[float, int]:
        """Largest step for entering q moving sigma*delta; returns (delta, blocker).

        blocker -1 means the entering variable flips to its opposite bound,
        -2 means the direction is unblocked.
        """
        own_cap = self.ub[q] - self.lb[q]
        if self.m == 0:
            if np.isinf(own_cap):
                return np.inf, -2
            return float(own_cap), -1
        tol = self.opt.feasibility_tol
        rates = -sigma * w
        xb = self.x[self.basis]
        lo = self.lb[self.basis]
        hi = self.ub[self.basis]
        live = np.abs(w) > _PIVOT_TOL
        steps = np.full(self.m, np.inf)
        if phase1:
            viol_lo = xb < lo - tol
            viol_hi = xb > hi + tol
            feas = ~(viol_lo | viol_hi)
            m3 = live & viol_lo & (rates > 0)
            steps[m3] = (lo[m3] - xb[m3]) / rates[m3]
            m4 = live & viol_hi & (rates < 0)
            steps[m4] = (hi[m4] - xb[m4]) / rates[m4]
        else:
            feas = np.ones(self.m, dtype=bool)
        m1 = live & feas & (rates < 0) & np.isfinite(lo)
        steps[m1] = np.maximum(xb[m1] - lo[m1], 0.0) / -rates[m1]
        m2 = live & feas & (rates > 0) & np.isfinite(hi)
        steps[m2] = np.maximum(hi[m2] - xb[m2], 0.0) / rates[m2]
        min_step = steps.min()
        if min_step >= own_cap:
            if np.isinf(own_cap):
                return np.inf, -2
            return float(own_cap), -1
        if np.isinf(min_step):
            return np.inf, -2
        # among near-ties prefer the largest pivot magnitude (first on ties)
        near = steps <= min_step + 1e-9
        score = np.where(near, np.abs(w), -1.0)
        blocker = int(np.argmax(score))
        return max(float(steps[blocker]), 0.0), blocker

    def _pivot(self, q: int, sigma: float, w: np.ndarray, delta: float, blocker: int) -> None:
        if delta:
            self.x[self.basis] -= sigma * delta * w
        if blocker == -1:
            self.x[q] = self.ub[q] if sigma > 0 else self.lb[q]
            self.vstat[q] = _AT_UPPER if sigma > 0 else _AT_LOWER
            return
        leaving = int(self.basis[blocker])
        self.x[q] = self.x[q] + sigma * delta
        self.vstat[q] = _BASIC
        x_leave = self.x[leaving]
        lo, hi = self.lb[leaving], self.ub[leaving]
        if np.isinf(lo) and np.isinf(hi):
            self.vstat[leaving] = _FREE
        elif np.isinf(hi) or abs(x_leave - lo) <= abs(x_leave - hi):
            self.x[leaving] = lo
            self.vstat[leaving] = _AT_LOWER
        else:
            self.x[leaving] = hi
            self.vstat[leaving] = _AT_UPPER
        self.basis[blocker] = q
        pivot = w[blocker]
        if abs(pivot) < _PIVOT_TOL:
            raise _NumericalBreakdown("pivot element vanished")
        row = self.b_inv[blocker] / pivot
        self.b_inv -= np.outer(w, row)
        self.b_inv[blocker] = row
        self._pivots_since_refactor += 1
        if self._pivots_since_refactor >= _REFACTOR_EVERY:
            self._refactor()

    # -- phases ------------------------------------------------------------

    def _merit(self, phase1: bool) -> float:
        if phase1:
            below, above = self._violations()
            return float(below.sum() + above.sum())
        return float(self.c @ self.x)

    def dual_infeasibility(self) -> tuple[float, np.ndarray]:
        """Worst wrong-signed reduced cost over nonbasic columns, plus duals."""
        if self.m == 0:
            d = self.c.copy()
            y = np.zeros(0)
        else:
            y = self.b_inv.T @ self.c[self.basis]
            d = self.c - (self.aug_t @ y)
        viol = np.zeros(self.total)
        movable = self.ub > self.lb
        at_lo = (self.vstat == _AT_LOWER) & movable
        at_hi = (self.vstat == _AT_UPPER) & movable
        free_nb = self.vstat == _FREE
        viol[at_lo] = np.maximum(-d[at_lo], 0.0)
        viol[at_hi] = np.maximum(d[at_hi], 0.0)
        viol[free_nb] = np.abs(d[free_nb])
        return float(viol.max(initial=0.0)), y

    def _run_phase(self, phase1: bool, deadline: float | None, iter_cap: int) -> str:
        bland_since: int | None = None
        last_merit = np.inf
        stall = 0
        retried = False
        while True:
            if phase1:
                g = self._phase1_costs()
                if not g.any():
                    return "feasible"
                d = self._reduced_costs(g)
            else:
                d = self._reduced_costs(None)
            merit = self._merit(phase1)
            if merit < last_merit - 1e-12:
                stall = 0
                last_merit = merit
                bland_since = None
            else:
                stall += 1
                if stall > _STALL_LIMIT and bland_since is None:
                    bland_since = self.iterations
            q = self._choose_entering(d, bland=bland_since is not None)
            if q < 0:
                if not phase1:
                    return "optimal"
                # re-verify the infeasibility certificate on a fresh basis once
                if not retried:
                    retried = True
                    self._refactor()
                    continue
                return "infeasible"
            retried = False
            sigma = 1.0 if (self.vstat[q] == _AT_LOWER
                            or (self.vstat[q] == _FREE and d[q] < 0)) else -1.0
            w = self._column(q)
            delta, blocker = self._ratio_test(q, sigma, w, phase1)
            if blocker == -2:
                if phase1:
                    raise _NumericalBreakdown("unblocked direction in phase 1")
                return "unbounded"
            self._pivot(q, sigma, w, delta, blocker)
            self.iterations += 1
            if self.iterations >= iter_cap:
                return "iteration_limit"
            if deadline is not None and self.iterations % 64 == 0 \
                    and time.monotonic() > deadline:
                return "time_limit"

    def solve(self, deadline: float | None = None) -> str:
        iter_cap = self.opt.iteration_limit or (20_000 + 60 * (self.m + self.n))
        tol = self.opt.feasibility_tol
        for _ in range(2):
            if self._max_infeasibility() > tol:
                outcome = self._run_phase(True, deadline, iter_cap)
                if outcome != "feasible":
                    return outcome
            outcome = self._run_phase(False, deadline, iter_cap)
            if outcome != "optimal":
                return outcome
            self._refactor()
            if self._max_infeasibility() <= tol * 10:
                return "optimal"
        return "optimal" if self._max_infeasibility() <= 1e-5 else "numerical"


def _eliminate_fixed(problem: MilpProblem, tol: float):
    """Split fixed columns (lower == upper) out of the system."""
    lo, hi = problem.col_lower, problem.col_upper
    fixed = (hi <= lo) & np.isfinite(lo) & np.isfinite(hi)
    free_idx = np.flatnonzero(~fixed)
    fixed_idx = np.flatnonzero(fixed)
    fixed_vals = lo[fixed_idx]
    a_csc = problem.a_matrix.tocsc()
    if fixed_idx.size and problem.n_rows:
        shift = np.asarray(a_csc[:, fixed_idx] @ fixed_vals).ravel()
    else:
        shift = np.zeros(problem.n_rows)
    reduced = a_csc[:, free_idx] if free_idx.size else sp.csc_matrix((problem.n_rows, 0))
    row_lo = problem.row_lower - shift
    row_hi = problem.row_upper - shift
    offset_extra = float(problem.c[fixed_idx] @ fixed_vals) if fixed_idx.size else 0.0
    keep_rows = np.ones(problem.n_rows, dtype=bool)
    if problem.n_rows:
        nnz_per_row = np.diff(reduced.tocsr().indptr)
        empty = nnz_per_row == 0
        bad = empty & ((row_lo > tol) | (row_hi < -tol))
        if bad.any():
            return None
        keep_rows = ~empty
    reduced = reduced.tocsr()[keep_rows].tocsc()
    return {
        "free_idx": free_idx,
        "fixed_idx": fixed_idx,
        "fixed_vals": fixed_vals,
        "a": reduced,
        "row_lo": row_lo[keep_rows],
        "row_hi": row_hi[keep_rows],
        "kept_rows": np.flatnonzero(keep_rows),
        "c": problem.c[free_idx],
        "lb": lo[free_idx],
        "ub": hi[free_idx],
        "offset_extra": offset_extra,
    }


def _finish_lp(problem: MilpProblem, opt: SolveOptions, x_full: np.ndarray,
               iterations: int) -> SolveResult:
    np.clip(x_full, problem.col_lower, problem.col_upper, out=x_full)
    obj = float(problem.c @ x_full + problem.offset)
    audit = check_solution(problem, x_full, tol=max(opt.feasibility_tol * 100, 1e-5))
    msg = ""
    if audit["max_row_violation"] > max(opt.feasibility_tol * 100, 1e-5) or \
            audit["max_bound_violation"] > max(opt.feasibility_tol * 100, 1e-5):
        msg = (f"residuals above tolerance: rows {audit['max_row_violation']:.2e}, "
               f"bounds {audit['max_bound_violation']:.2e}")
    return SolveResult(status="optimal", x=x_full, objective=obj, best_bound=obj,
                       gap=0.0, iterations=iterations, message=msg)


def _status_result(status: str, iterations: int) -> SolveResult:
    if status == "iteration_limit":
        return SolveResult(status="time_limit", iterations=iterations,
                           message="simplex iteration cap reached")
    if status == "numerical":
        return SolveResult(status="numerical", iterations=iterations,
                           message="residuals did not settle after refactorisation")
    return SolveResult(status=status, iterations=iterations)


def solve_lp(problem: MilpProblem, options: SolveOptions | None = None,
             deadline: float | None = None) -> SolveResult:
    """Solve the LP relaxation of the problem (integrality ignored)."""
    opt = options or SolveOptions()
    if (problem.col_upper < problem.col_lower).any() or \
            (problem.row_upper < problem.row_lower).any():
        return SolveResult(status="infeasible", message="contradictory bounds")
    parts = _eliminate_fixed(problem, opt.feasibility_tol)
    if parts is None:
        return SolveResult(status="infeasible", message="fixed columns violate a row")
    a = parts["a"]
    m, n = a.shape
    x_full = np.empty(problem.n_cols)
    x_full[parts["fixed_idx"]] = parts["fixed_vals"]
    if n == 0:
        obj = problem.offset + parts["offset_extra"]
        return SolveResult(status="optimal", x=x_full, objective=obj,
                           best_bound=obj, gap=0.0, iterations=0)
    if opt.scale and m:
        row_s, col_s = _equilibrate(a)
    else:
        row_s, col_s = np.ones(m), np.ones(n)
    a_scaled = (sp.diags(row_s) @ a @ sp.diags(col_s)).tocsc() if m else a.tocsc()
    core = _Simplex(a_scaled, parts["c"] * col_s, opt)
    lower = np.concatenate([parts["lb"] / col_s, parts["row_lo"] * row_s])
    upper = np.concatenate([parts["ub"] / col_s, parts["row_hi"] * row_s])
    try:
        core.load(lower, upper)
        status = core.solve(deadline)
    except _NumericalBreakdown as exc:
        return SolveResult(status="numerical", iterations=core.iterations,
                           message=str(exc))
    if status != "optimal":
        return _status_result(status, core.iterations)
    x_full[parts["free_idx"]] = core.x[:n] * col_s
    res = _finish_lp(problem, opt, x_full, core.iterations)
    dual_viol, y_scaled = core.dual_infeasibility()
    duals = np.zeros(problem.n_rows)
    duals[parts["kept_rows"]] = y_scaled * row_s
    status_names = {_BASIC: "basic", _AT_LOWER: "lower", _AT_UPPER: "upper", _FREE: "free"}
    col_status = np.array(["fixed"] * problem.n_cols, dtype=object)
    col_status[parts["free_idx"]] = [status_names[s] for s in core.vstat[:n]]
    res.meta = {
        "dual_infeasibility": dual_viol,
        "duals": duals,
        "reduced_costs": problem.c - (problem.a_matrix.T @ duals
                                      if problem.n_rows else 0.0),
        "col_status": col_status,
    }
    return res


def _fractional_columns(x: np.ndarray, integer: np.ndarray, tol: float) -> np.ndarray:
    cols = np.flatnonzero(integer)
    if cols.size == 0:
        return cols
    vals = x[cols]
    return cols[np.abs(vals - np.round(vals)) > tol]


class _NodeSolver:
    """Shared simplex core for branch-and-bound node LPs with warm starts."""

    def __init__(self, problem: MilpProblem, opt: SolveOptions):
        self.problem = problem
        self.opt = opt
        a_csc = problem.a_matrix.tocsc()
        m, n = a_csc.shape
        if opt.scale and m:
            self.row_s, self.col_s = _equilibrate(a_csc)
        else:
            self.row_s, self.col_s = np.ones(m), np.ones(n)
        a_scaled = (sp.diags(self.row_s) @ a_csc @ sp.diags(self.col_s)).tocsc() if m else a_csc
        self.core = _Simplex(a_scaled, problem.c * self.col_s, self.opt)
        self.row_lo_scaled = problem.row_lower * self.row_s
        self.row_hi_scaled = problem.row_upper * self.row_s

    def solve(self, col_lb: np.ndarray, col_ub: np.ndarray,
              start: tuple[np.ndarray, np.ndarray] | None,
              deadline: float | None) -> tuple[SolveResult, tuple | None]:
        lower = np.concatenate([col_lb / self.col_s, self.row_lo_scaled])
        upper = np.concatenate([col_ub / self.col_s, self.row_hi_scaled])
        try:
            self.core.load(lower, upper, start)
            status = self.core.solve(deadline)
        except _NumericalBreakdown as exc:
            return SolveResult(status="numerical", iterations=self.core.iterations,
                               message=str(exc)), None
        if status != "optimal":
            return _status_result(status, self.core.iterations), None
        x_full = self.core.x[: self.problem.n_cols] * self.col_s
        np.clip(x_full, col_lb, col_ub, out=x_full)
        obj = float(self.problem.c @ x_full + self.problem.offset)
        res = SolveResult(status="optimal", x=x_full, objective=obj, best_bound=obj,
                          gap=0.0, iterations=self.core.iterations)
        return res, self.core.snapshot()


def solve_milp(problem: MilpProblem, options: SolveOptions | None = None) -> SolveResult:
    """Branch and bound with best-bound selection and most-fractional branching."""
    opt = options or SolveOptions()
    deadline = time.monotonic() + opt.time_limit if opt.time_limit else None
    if not problem.integer.any():
        res = solve_lp(problem, opt, deadline)
        res.nodes = 1
        return res
    if (problem.col_upper < problem.col_lower).any() or \
            (problem.row_upper < problem.row_lower).any():
        return SolveResult(status="infeasible", message="contradictory bounds")

    nodes = 1
    node_solver = _NodeSolver(problem, opt)
    root, root_state = node_solver.solve(problem.col_lower, problem.col_upper,
                                         None, deadline)
    total_iters = root.iterations
    if root.status != "optimal":
        root.nodes = nodes
        root.iterations = total_iters
        return root

    incumbent_x: np.ndarray | None = None
    incumbent_obj = np.inf
    counter = 0
    heap: list = []
    int_cols = np.flatnonzero(problem.integer)
    since_repair = 0

    def try_round_repair(x_frac: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                         state: tuple | None) -> None:
        # fix every integer at its rounded value and re-optimise the rest;
        # any feasible result is an incumbent, which drives pruning
        nonlocal incumbent_x, incumbent_obj, nodes, total_iters, since_repair
        since_repair = 0
        vals = np.clip(np.floor(x_frac[int_cols] + 0.5), lo[int_cols], hi[int_cols])
        fix_lo = lo.copy()
        fix_hi = hi.copy()
        fix_lo[int_cols] = vals
        fix_hi[int_cols] = vals
        res, _ = node_solver.solve(fix_lo, fix_hi, state, deadline)
        nodes += 1
        total_iters += res.iterations
        if res.status == "optimal" and res.objective < incumbent_obj:
            incumbent_obj = res.objective
            incumbent_x = res.x

    def push(res: SolveResult, lo: np.ndarray, hi: np.ndarray, state: tuple) -> None:
        nonlocal counter
        heapq.heappush(heap, (res.objective, counter, res.x, lo, hi, state))
        counter += 1

    def register(res: SolveResult, lo: np.ndarray, hi: np.ndarray, state: tuple) -> None:
        nonlocal incumbent_x, incumbent_obj
        frac = _fractional_columns(res.x, problem.integer, opt.integrality_tol)
        if frac.size == 0:
            if res.objective < incumbent_obj:
                incumbent_obj = res.objective
                incumbent_x = res.x
            return
        push(res, lo, hi, state)

    register(root, problem.col_lower.copy(), problem.col_upper.copy(), root_state)

    status = "optimal"
    while heap:
        # nodes whose bound cannot beat the incumbent are proven dominated
        while heap and heap[0][0] >= incumbent_obj - 1e-12:
            heapq.heappop(heap)
        if not heap:
            break
        bound = heap[0][0]
        if incumbent_obj < np.inf:
            gap = (incumbent_obj - bound) / max(abs(incumbent_obj), 1e-9)
            if 0.0 < gap <= opt.relative_mip_gap:
                status = "gap_limit"
                break
        if deadline is not None and time.monotonic() > deadline:
            status = "time_limit"
            break
        if nodes >= opt.node_limit:
            status = "node_limit"
            break
        bound, _, x_frac, lo, hi, state = heapq.heappop(heap)
        if bound >= incumbent_obj - 1e-12:
            continue
        since_repair += 1
        if incumbent_x is None or since_repair >= _REPAIR_EVERY:
            try_round_repair(x_frac, lo, hi, state)
            if bound >= incumbent_obj - 1e-12:
                continue
        frac = _fractional_columns(x_frac, problem.integer, opt.integrality_tol)
        # branch on cost-bearing decisions first, most fractional as tie-break
        dist = np.abs(x_frac[frac] - np.round(x_frac[frac]))
        order = np.lexsort((dist, np.abs(problem.c[frac])))
        j = int(frac[order[-1]])
        for child in ("down", "up"):
            child_lo = lo.copy()
            child_hi = hi.copy()
            if child == "down":
                child_hi[j] = np.floor(x_frac[j])
            else:
                child_lo[j] = np.ceil(x_frac[j])
            if child_hi[j] < child_lo[j]:
                continue
            res, child_state = node_solver.solve(child_lo, child_hi, state, deadline)
            total_iters += res.iterations
            nodes += 1
            if res.status in ("time_limit", "numerical"):
                status = res.status
                break
            if res.status != "optimal":
                continue
            if res.objective >= incumbent_obj - 1e-12:
                continue
            register(res, child_lo, child_hi, child_state)
        if status != "optimal":
            break

    if incumbent_x is None:
        if status == "optimal":
            return SolveResult(status="infeasible", iterations=total_iters, nodes=nodes,
                               message="no integral solution in an exhausted tree")
        return SolveResult(status=status, iterations=total_iters, nodes=nodes,
                           message="stopped before any integral solution was found")

    if not heap and status == "optimal":
        best_bound = incumbent_obj
        gap = 0.0
    else:
        outstanding = min((entry[0] for entry in heap), default=incumbent_obj)
        best_bound = min(outstanding, incumbent_obj)
        gap = (incumbent_obj - best_bound) / max(abs(incumbent_obj), 1e-9)

    x_out = incumbent_x.copy()
    ints = problem.integer
    x_out[ints] = np.round(x_out[ints])
    return SolveResult(status=status, x=x_out, objective=float(incumbent_obj),
                       best_bound=float(best_bound), gap=float(max(gap, 0.0)),
                       iterations=total_iters, nodes=nodes)
