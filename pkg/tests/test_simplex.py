"""LP engine checks against independent oracles.

scipy.optimize.linprog (HiGHS) serves as the cross-check oracle for the
randomized battery; the dispatch fixture is verified against direct vertex
enumeration instead.
"""

import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import linprog

from floodmit.simplex import BasisState, Workspace, solve_linear_program

DUAL_TOL = 1e-6


def _solve(c, A, senses, b, lb, ub, **kw):
    return solve_linear_program(np.asarray(c, float), sp.csc_matrix(np.atleast_2d(A)), senses, np.asarray(b, float), np.asarray(lb, float), np.asarray(ub, float), **kw)


def _scipy_solve(c, A, senses, b, lb, ub):
    A = np.atleast_2d(A)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i, s in enumerate(senses):
        if s == "L":
            A_ub.append(A[i]); b_ub.append(b[i])
        elif s == "G":
            A_ub.append(-A[i]); b_ub.append(-b[i])
        else:
            A_eq.append(A[i]); b_eq.append(b[i])
    return linprog(
        c,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=list(zip(lb, ub)),
        method="highs",
    )


def test_simple_maximization_via_negation():
    # min -x s.t. x <= 1, x >= 0
    res = _solve([-1.0], [[1.0]], ["L"], [1.0], [0.0], [np.inf])
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-1.0, abs=1e-9)
    assert res.x[0] == pytest.approx(1.0, abs=1e-9)


def test_infeasible_pair():
    res = _solve([1.0], [[1.0], [1.0]], ["G", "L"], [1.0, 0.0], [-np.inf], [np.inf])
    assert res.status == "infeasible"
    assert res.infeasibility > 0


def test_unbounded():
    res = _solve([-1.0], [[0.0]], ["L"], [1.0], [0.0], [np.inf])
    assert res.status == "unbounded"


def test_duality_certificate_and_residual():
    res = _solve(
        [1.0, 2.0, -1.0],
        [[1, 1, 1], [1, -1, 0]],
        ["E", "L"],
        [2.0, 0.5],
        [0, 0, 0],
        [2, 2, 2],
    )
    assert res.status == "optimal"
    assert abs(res.objective - res.dual_objective) <= DUAL_TOL
    assert res.primal_residual < 1e-8


def test_degenerate_cycling_guard():
    # Classic cycling-prone instance; anti-cycling must still terminate.
    c = [-0.75, 150.0, -0.02, 6.0]
    A = [
        [0.25, -60.0, -0.04, 9.0],
        [0.5, -90.0, -0.02, 3.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
    senses = ["L", "L", "L"]
    b = [0.0, 0.0, 1.0]
    res = _solve(c, A, senses, b, [0.0] * 4, [np.inf] * 4)
    ref = _scipy_solve(c, A, senses, b, [0.0] * 4, [np.inf] * 4)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(ref.fun, abs=1e-8)


def _vertex_enumeration_optimum(c, A_eq, b_eq, lb, ub):
    """Brute-force LP oracle: scan basic solutions of [A | I-slacks] = b."""
    m, n = A_eq.shape
    best = None
    for cols in itertools.combinations(range(n), m):
        B = A_eq[:, cols]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        # Nonbasic variables pinned at each bound combination.
        nonbasic = [j for j in range(n) if j not in cols]
        for corners in itertools.product(*[(lb[j], ub[j]) for j in nonbasic]):
            if any(np.isinf(v) for v in corners):
                continue
            x = np.zeros(n)
            for j, v in zip(nonbasic, corners):
                x[j] = v
            rhs = b_eq - A_eq[:, nonbasic] @ np.array(corners)
            xb = np.linalg.solve(B, rhs)
            x[list(cols)] = xb
            if np.all(x >= lb - 1e-9) and np.all(x <= ub + 1e-9):
                val = float(c @ x)
                if best is None or val < best - 1e-12:
                    best = val
    return best


def test_two_bus_dispatch_matches_vertex_enumeration():
    # Variables: generation, overgen, served fraction, angle, flow.
    # One generator (cap 2) feeds a unit load across a 1.5-capacity line.
    # Rows: node balances and Ohm's law with susceptance -10.
    c = np.array([0.0, 1.0, -1.0, 0.0, 0.0])
    A = np.array(
        [
            [1.0, -1.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, -1.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, 10.0, 1.0],
        ]
    )
    b = np.array([0.0, 0.0, 0.0])
    lb = np.array([0.0, 0.0, 0.0, -np.pi / 2, -1.5])
    ub = np.array([2.0, 2.0, 1.0, np.pi / 2, 1.5])
    oracle = _vertex_enumeration_optimum(c, A, b, lb, ub)
    res = _solve(c, A, ["E", "E", "E"], b, lb, ub)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(oracle, abs=1e-9)
    assert res.objective + 1.0 == pytest.approx(0.0, abs=1e-9)  # all load served


def test_randomized_battery_against_scipy():
    rng = np.random.default_rng(20240817)
    statuses = {"optimal": 0, "infeasible": 0, "unbounded": 0}
    for _ in range(250):
        m = int(rng.integers(1, 8))
        n = int(rng.integers(1, 9))
        A = np.round(rng.normal(0, 1, (m, n)) * (rng.random((m, n)) < 0.7), 2)
        if np.abs(A).sum() == 0:
            A[0, 0] = 1.0
        c = np.round(rng.normal(0, 1, n), 2)
        b = np.round(rng.normal(0, 2, m), 2)
        senses = [str(s) for s in rng.choice(["L", "G", "E"], m)]
        lb = np.where(rng.random(n) < 0.85, np.round(rng.uniform(-3, 0, n), 2), -np.inf)
        ub = np.where(rng.random(n) < 0.85, np.round(rng.uniform(0, 3, n), 2), np.inf)
        ub = np.maximum(ub, lb)

        mine = _solve(c, A, senses, b, lb, ub)
        ref = _scipy_solve(c, A, senses, b, lb, ub)
        expect = {0: "optimal", 2: "infeasible", 3: "unbounded"}[ref.status]
        assert mine.status == expect, (mine.status, expect)
        statuses[expect] += 1
        if expect == "optimal":
            assert mine.objective == pytest.approx(ref.fun, abs=1e-6)
            assert abs(mine.objective - mine.dual_objective) <= DUAL_TOL
            assert mine.primal_residual < 1e-8
    # The battery must actually exercise all three outcomes.
    assert min(statuses.values()) > 5, statuses


def test_warm_restart_after_rhs_and_bound_changes():
    rng = np.random.default_rng(7)
    hits = 0
    for _ in range(60):
        m, n = int(rng.integers(2, 6)), int(rng.integers(2, 7))
        A = np.round(rng.normal(0, 1, (m, n)), 2)
        c = np.round(rng.normal(0, 1, n), 2)
        b = np.round(rng.normal(0, 2, m), 2)
        senses = [str(s) for s in rng.choice(["L", "G"], m)]
        lb, ub = np.zeros(n), np.full(n, 4.0)
        ws = Workspace(c, sp.csc_matrix(A), senses, b, lb, ub)
        first = solve_linear_program(workspace=ws)
        if first.status != "optimal":
            continue
        hits += 1
        b2 = b + np.round(rng.normal(0, 0.6, m), 2)
        lb2, ub2 = lb.copy(), ub.copy()
        j = int(rng.integers(0, n))
        lb2[j] = ub2[j] = float(rng.integers(0, 2))
        ws.set_rhs(b2)
        ws.set_bounds(lb2, ub2)
        warm = solve_linear_program(workspace=ws, warm=first.basis_state)
        cold = _solve(c, A, senses, b2, lb2, ub2)
        assert warm.status == cold.status
        if cold.status == "optimal":
            assert warm.objective == pytest.approx(cold.objective, abs=1e-7)
            assert abs(warm.objective - warm.dual_objective) <= DUAL_TOL
    assert hits > 20


def test_fixed_variable_contributes_to_dual_objective():
    # Pinning x at 1 forces dual pricing of the pinned value.
    res = _solve([3.0, 1.0], [[1.0, 1.0]], ["G"], [2.0], [1.0, 0.0], [1.0, 5.0])
    assert res.status == "optimal"
    assert res.objective == pytest.approx(4.0, abs=1e-9)
    assert abs(res.objective - res.dual_objective) <= DUAL_TOL


def test_row_dual_is_rhs_sensitivity():
    # min x : x >= b has optimum b, dual d(obj)/d(b) = 1.
    res = _solve([1.0], [[1.0]], ["G"], [2.0], [0.0], [np.inf])
    bumped = _solve([1.0], [[1.0]], ["G"], [2.5], [0.0], [np.inf])
    assert res.row_duals[0] == pytest.approx(
        (bumped.objective - res.objective) / 0.5, abs=1e-9
    )


def test_no_rows_edge_case():
    res = _solve(np.array([1.0, -2.0]), np.zeros((0, 2)), [], np.zeros(0), [0.0, 0.0], [3.0, 3.0])
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-6.0)
