"""Solver tests against brute-force oracles.

The LP oracle enumerates basic solutions of the slack form [A | I] for
min c'x s.t. A x <= b, x >= 0 (boxes encoded as rows), so it shares no code
with the simplex. MILP answers are checked against subset enumeration.
"""

import itertools

import numpy as np
import pytest
import scipy.sparse as sp

from icegrid.problem import MilpProblem
from icegrid.solver import SolveOptions, check_solution, solve_lp, solve_milp

INF = np.inf


def vertex_minimum(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> tuple[float, np.ndarray]:
    """min c'x s.t. a x <= b, x >= 0 by enumerating bases of [a | I]."""
    m, n = a.shape
    full = np.hstack([a, np.eye(m)])
    best_obj = np.inf
    best_x = None
    for cols in itertools.combinations(range(n + m), m):
        basis = full[:, cols]
        if abs(np.linalg.det(basis)) < 1e-10:
            continue
        xb = np.linalg.solve(basis, b)
        if (xb < -1e-9).any():
            continue
        x = np.zeros(n + m)
        x[list(cols)] = xb
        obj = float(c @ x[:n])
        if obj < best_obj - 1e-12:
            best_obj = obj
            best_x = x[:n].copy()
    return best_obj, best_x


def lp_problem(c, a, row_lower, row_upper, col_lower, col_upper, integer=None):
    n = len(c)
    return MilpProblem(
        c=np.asarray(c, dtype=float),
        a_matrix=sp.csr_matrix(np.atleast_2d(np.asarray(a, dtype=float))),
        row_lower=np.asarray(row_lower, dtype=float),
        row_upper=np.asarray(row_upper, dtype=float),
        col_lower=np.asarray(col_lower, dtype=float),
        col_upper=np.asarray(col_upper, dtype=float),
        integer=np.zeros(n, dtype=bool) if integer is None else np.asarray(integer, dtype=bool),
    )


def random_instance(rng):
    n = int(rng.integers(3, 6))
    m = int(rng.integers(2, 5))
    a = rng.uniform(-1.0, 2.0, (m, n))
    b = rng.uniform(0.5, 3.0, m)
    u = rng.uniform(1.0, 4.0, n)
    c = rng.uniform(-2.0, 1.0, n)
    return a, b, u, c


class TestLpAgainstVertexOracle:
    def test_row_encoded_boxes_match_oracle(self):
        rng = np.random.default_rng(20260815)
        for _ in range(25):
            a, b, u, c = random_instance(rng)
            m, n = a.shape
            a_ext = np.vstack([a, np.eye(n)])
            b_ext = np.concatenate([b, u])
            oracle_obj, _ = vertex_minimum(a_ext, b_ext, c)
            prob = lp_problem(c, a_ext, np.full(m + n, -INF), b_ext,
                              np.zeros(n), np.full(n, INF))
            res = solve_lp(prob)
            assert res.status == "optimal"
            assert res.objective == pytest.approx(oracle_obj, abs=1e-6)
            assert check_solution(prob, res.x, tol=1e-6)["feasible"]

    def test_column_bounds_match_row_encoding(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            a, b, u, c = random_instance(rng)
            m, n = a.shape
            a_ext = np.vstack([a, np.eye(n)])
            b_ext = np.concatenate([b, u])
            oracle_obj, _ = vertex_minimum(a_ext, b_ext, c)
            prob = lp_problem(c, a, np.full(m, -INF), b, np.zeros(n), u)
            res = solve_lp(prob)
            assert res.status == "optimal"
            assert res.objective == pytest.approx(oracle_obj, abs=1e-6)
            assert check_solution(prob, res.x, tol=1e-6)["feasible"]

    def test_equality_rows_match_double_inequality_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = 4
            a = rng.uniform(-1.0, 2.0, (2, n))
            u = rng.uniform(1.0, 3.0, n)
            c = rng.uniform(-2.0, 1.0, n)
            x_feas = rng.uniform(0.2, 0.8) * u
            be = a @ x_feas
            a_ext = np.vstack([a, -a, np.eye(n)])
            b_ext = np.concatenate([be, -be, u])
            oracle_obj, _ = vertex_minimum(a_ext, b_ext, c)
            prob = lp_problem(c, a, be, be, np.zeros(n), u)
            res = solve_lp(prob)
            assert res.status == "optimal"
            assert res.objective == pytest.approx(oracle_obj, abs=1e-6)


class TestLpEdgeCases:
    def test_assignment_polytope_matches_permutation_enumeration(self):
        rng = np.random.default_rng(9)
        cost = rng.uniform(0.0, 5.0, (3, 3))
        rows = []
        for i in range(3):
            r = np.zeros(9)
            r[3 * i: 3 * i + 3] = 1.0
            rows.append(r)
        for j in range(3):
            r = np.zeros(9)
            r[j::3] = 1.0
            rows.append(r)
        prob = lp_problem(cost.ravel(), np.array(rows), np.ones(6), np.ones(6),
                          np.zeros(9), np.ones(9))
        res = solve_lp(prob)
        best = min(sum(cost[i, p[i]] for i in range(3))
                   for p in itertools.permutations(range(3)))
        assert res.status == "optimal"
        assert res.objective == pytest.approx(best, abs=1e-8)

    def test_phase_one_needed_when_origin_infeasible(self):
        # min x1 + 2 x2  s.t.  x1 + x2 >= 1.5, 0 <= x <= 1  ->  x = (1, 0.5)
        prob = lp_problem([1.0, 2.0], [[1.0, 1.0]], [1.5], [INF],
                          [0.0, 0.0], [1.0, 1.0])
        res = solve_lp(prob)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(2.0, abs=1e-9)
        assert res.x == pytest.approx([1.0, 0.5], abs=1e-9)

    def test_free_variables(self):
        prob = lp_problem([1.0, 1.0], [[1.0, 1.0]], [1.0], [INF],
                          [-INF, -INF], [INF, INF])
        res = solve_lp(prob)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(1.0, abs=1e-9)

    def test_infeasible_detected(self):
        prob = lp_problem([1.0], [[1.0]], [2.0], [INF], [0.0], [1.0])
        res = solve_lp(prob)
        assert res.status == "infeasible"
        assert not res.ok

    def test_unbounded_detected(self):
        prob = lp_problem([-1.0], np.zeros((0, 1)), [], [], [0.0], [INF])
        res = solve_lp(prob)
        assert res.status == "unbounded"

    def test_contradictory_bounds_is_infeasible(self):
        prob = lp_problem([1.0], [[1.0]], [-INF], [INF], [2.0], [1.0])
        assert solve_lp(prob).status == "infeasible"

    def test_fixed_columns_are_respected(self):
        # x2 pinned to 1.5; remaining LP puts x1 at the row's slack
        prob = lp_problem([1.0, 1.0, 0.5], [[1.0, 1.0, 1.0]], [2.0], [2.0],
                          [0.0, 1.5, 0.0], [5.0, 1.5, 5.0])
        res = solve_lp(prob)
        assert res.status == "optimal"
        assert res.x[1] == pytest.approx(1.5, abs=1e-12)
        assert res.objective == pytest.approx(1.5 + 0.5 * 0.5, abs=1e-9)

    def test_fixed_columns_violating_row_infeasible(self):
        prob = lp_problem([1.0], [[1.0]], [3.0], [3.0], [1.0], [1.0])
        res = solve_lp(prob)
        assert res.status == "infeasible"

    def test_no_feasible_point_beats_reported_optimum(self):
        rng = np.random.default_rng(123)
        a, b, u, c = random_instance(rng)
        m, n = a.shape
        prob = lp_problem(c, a, np.full(m, -INF), b, np.zeros(n), u)
        res = solve_lp(prob)
        assert res.status == "optimal"
        hits = 0
        for _ in range(2000):
            x = rng.uniform(0.0, 1.0, n) * u
            if (a @ x <= b + 1e-12).all():
                hits += 1
                assert c @ x >= res.objective - 1e-9
        assert hits > 0

    def test_kkt_reduced_cost_signs_at_optimum(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            a, b, u, c = random_instance(rng)
            m, n = a.shape
            prob = lp_problem(c, a, np.full(m, -INF), b, np.zeros(n), u)
            res = solve_lp(prob)
            assert res.status == "optimal"
            assert res.meta["dual_infeasibility"] <= 1e-7 + 1e-12
            d = res.meta["reduced_costs"]
            tol = 1e-6 * (1.0 + np.abs(c).max())
            for j, stat in enumerate(res.meta["col_status"]):
                if stat == "lower":
                    assert d[j] >= -tol
                elif stat == "upper":
                    assert d[j] <= tol

    def test_scipy_cross_check_on_medium_lp(self):
        from scipy.optimize import linprog

        rng = np.random.default_rng(2024)
        m, n = 40, 60
        a = rng.uniform(-1.0, 2.0, (m, n))
        b = rng.uniform(1.0, 5.0, m)
        u = rng.uniform(0.5, 3.0, n)
        c = rng.uniform(-2.0, 1.0, n)
        prob = lp_problem(c, a, np.full(m, -INF), b, np.zeros(n), u)
        res = solve_lp(prob)
        ref = linprog(c, A_ub=a, b_ub=b, bounds=list(zip(np.zeros(n), u)),
                      method="highs")
        assert res.status == "optimal" and ref.status == 0
        assert res.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)


KNAP_VALUES = np.array([60.0, 100.0, 120.0, 70.0, 80.0])
KNAP_WEIGHTS = np.array([10.0, 20.0, 30.0, 15.0, 25.0])
KNAP_CAP = 60.0


def knapsack_problem():
    return lp_problem(-KNAP_VALUES, KNAP_WEIGHTS.reshape(1, -1), [-INF], [KNAP_CAP],
                      np.zeros(5), np.ones(5), integer=np.ones(5, dtype=bool))


def knapsack_best_by_enumeration() -> float:
    best = 0.0
    for picks in itertools.product([0, 1], repeat=5):
        arr = np.array(picks, dtype=float)
        if arr @ KNAP_WEIGHTS <= KNAP_CAP:
            best = max(best, float(arr @ KNAP_VALUES))
    return best


class TestMilp:
    def test_knapsack_matches_subset_enumeration(self):
        res = solve_milp(knapsack_problem(), SolveOptions(relative_mip_gap=0.0))
        best = knapsack_best_by_enumeration()
        assert res.status == "optimal"
        assert -res.objective == pytest.approx(best, abs=1e-9)
        assert np.all(np.abs(res.x - np.round(res.x)) < 1e-9)
        assert res.gap == 0.0

    def test_resolve_is_bit_identical(self):
        r1 = solve_milp(knapsack_problem(), SolveOptions(relative_mip_gap=0.0))
        r2 = solve_milp(knapsack_problem(), SolveOptions(relative_mip_gap=0.0))
        assert r1.x.tobytes() == r2.x.tobytes()
        assert r1.objective == r2.objective
        assert r1.nodes == r2.nodes

    def test_mixed_integer_with_continuous_column(self):
        # min -y - 0.6 x  s.t.  y + x <= 1.5, y binary, 0 <= x <= 1
        # y=1 leaves x=0.5 (obj -1.3); y=0 gives x=1 (obj -0.6)
        prob = lp_problem([-1.0, -0.6], [[1.0, 1.0]], [-INF], [1.5],
                          [0.0, 0.0], [1.0, 1.0], integer=[True, False])
        res = solve_milp(prob, SolveOptions(relative_mip_gap=0.0))
        assert res.status == "optimal"
        assert res.objective == pytest.approx(-1.3, abs=1e-9)
        assert res.x == pytest.approx([1.0, 0.5], abs=1e-9)

    def test_integer_infeasible_but_lp_feasible(self):
        # x1 + x2 = 1.5 with both binary has fractional-only solutions
        prob = lp_problem([1.0, 1.0], [[1.0, 1.0]], [1.5], [1.5],
                          [0.0, 0.0], [1.0, 1.0], integer=[True, True])
        res = solve_milp(prob, SolveOptions(relative_mip_gap=0.0))
        assert res.status == "infeasible"
        assert "exhausted" in res.message

    def test_gap_limit_status_is_honest(self):
        res = solve_milp(knapsack_problem(), SolveOptions(relative_mip_gap=0.5))
        assert res.ok
        if res.status == "gap_limit":
            assert res.gap is not None and res.gap <= 0.5 + 1e-12
            assert res.best_bound <= res.objective + 1e-12

    def test_node_limit_status(self):
        res = solve_milp(knapsack_problem(),
                         SolveOptions(relative_mip_gap=0.0, node_limit=1))
        assert res.status == "node_limit"
        assert not res.ok

    def test_pure_lp_through_milp_entry(self):
        prob = lp_problem([1.0, 2.0], [[1.0, 1.0]], [1.5], [INF],
                          [0.0, 0.0], [1.0, 1.0])
        res = solve_milp(prob)
        assert res.status == "optimal"
        assert res.nodes == 1
        assert res.objective == pytest.approx(2.0, abs=1e-9)


class TestCheckSolution:
    def test_reports_violations(self):
        prob = lp_problem([1.0, 1.0], [[1.0, 1.0]], [1.0], [1.0],
                          [0.0, 0.0], [1.0, 1.0], integer=[True, False])
        bad = check_solution(prob, np.array([0.4, 0.2]))
        assert not bad["feasible"]
        assert bad["max_row_violation"] == pytest.approx(0.4, abs=1e-12)
        assert bad["max_integrality_violation"] == pytest.approx(0.4, abs=1e-12)
        good = check_solution(prob, np.array([1.0, 0.0]))
        assert good["feasible"]
        assert good["objective"] == pytest.approx(1.0)
