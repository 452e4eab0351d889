import itertools

import numpy as np
import pytest

from conftest import random_plan
from floodmit.extensive_form import (
    BigMPolicy,
    BuildOptions,
    add_no_good_cut,
    alpha_link_rows,
    build,
    fix_first_stage,
)
from floodmit.grid_model import Branch, Bus, GridNetwork, Substation
from floodmit.mitigation import Budget, CostSchedule, MitigationPlan, ZERO_PLAN, enumerate_plans
from floodmit.recourse import LossWeights, evaluate_plan, status_closure
from floodmit.scenario_model import FloodScenario, FloodScenarioSet
from floodmit.solver import BnbConfig, solve_lp, solve_milp

W = LossWeights()


def _single_bus_instance():
    net = GridNetwork(
        buses=(Bus("B", "K", p_load=1.0, is_reference=True),),
        branches=(),
        substations=(Substation("K", "115_161"),),
    )
    ss = FloodScenarioSet(
        (FloodScenario("w", 1.0, {"K": 1}),), level_count=3, unattainable_level=3
    )
    return net, ss


def test_first_stage_variable_count_and_pinning():
    net, ss = _single_bus_instance()
    ef = build(net, ss, CostSchedule.for_network(net), Budget(5), 3, W)
    x_vars = [v for v in ef.problem.variables if v.meta and v.meta[0] == "x"]
    assert len(x_vars) == 3  # one binary per level
    top = next(v for v in x_vars if v.meta[2] == 3)
    assert top.lb == top.ub == 0.0  # the unattainable level is pinned off


def test_dry_levels_fold_away():
    # A substation flooded to level 1 only links alpha to x_1; the dry levels
    # produce no rows.
    net, ss = _single_bus_instance()
    ef = build(net, ss, CostSchedule.for_network(net), Budget(5), 3, W)
    link_rows = [r for r in ef.problem.rows if r.name.startswith(("a0_", "a1_", "a2_", "a3_"))]
    assert len(link_rows) == 2  # one upper row for the flooded level + the lower row


def test_alpha_link_rows_truth_table_r3():
    """Exhaustive equivalence of the linear rows with the product logic.

    For |R| = 3, over every indicator row (cumulative or not) and every binary
    first-stage assignment: the alpha values admitted by the rows are exactly
    the product  prod_r (1 - xi_r (1 - x_r)).
    """
    for xi in itertools.product((0, 1), repeat=3):
        link = alpha_link_rows(xi)
        for x in itertools.product((0, 1), repeat=3):
            product_value = 1
            for r in range(3):
                product_value *= 1 - xi[r] * (1 - x[r])
            admitted = set()
            for alpha in (0, 1):
                if link[0] == "const":
                    ok = alpha == link[1]
                else:
                    ok = True
                    for a_coef, x_coefs, sense, rhs in link[1]:
                        lhs = a_coef * alpha + sum(c * x[r - 1] for r, c in x_coefs.items())
                        if sense == "L" and lhs > rhs + 1e-12:
                            ok = False
                        if sense == "G" and lhs < rhs - 1e-12:
                            ok = False
                if ok:
                    admitted.add(alpha)
            assert admitted == {product_value}, (xi, x, admitted)


def test_beta_rows_truth_table():
    # beta >= a_f + a_t - 1, beta <= a_f, beta <= a_t  <=>  beta = a_f * a_t.
    for af, at in itertools.product((0, 1), repeat=2):
        admitted = {
            b for b in (0, 1) if b >= af + at - 1 and b <= af and b <= at
        }
        assert admitted == {af * at}


def test_big_m_floor_enforced(tiny3):
    policy = BigMPolicy({br.id: 0.1 for br in tiny3.network.branches})
    with pytest.raises(ValueError, match="below the safe floor"):
        policy.check(tiny3.network)
    BigMPolicy.for_network(tiny3.network).check(tiny3.network)


def test_big_m_deactivates_ohm_at_any_feasible_point():
    # With M = |b| * 2*theta_max + flow_limit, a dead branch's Ohm residual
    # can never violate the relaxed rows: |-(flow) - b*(spread)| is at most
    # flow_limit + |b| * 2*theta_max.
    rng = np.random.default_rng(8)
    for _ in range(500):
        b = float(rng.uniform(-12, 12))
        if abs(b) < 0.5:
            continue
        s_max = float(rng.uniform(0.2, 3.0))
        t_max = float(rng.uniform(0.3, np.pi / 2))
        M = abs(b) * 2 * t_max + s_max
        flow = float(rng.uniform(-s_max, s_max))
        th_n = float(rng.uniform(-t_max, t_max))
        th_m = float(rng.uniform(-t_max, t_max))
        resid = -flow - b * (th_n - th_m)
        assert -M - 1e-12 <= resid <= M + 1e-12


def test_folding_constants(star8):
    # w4 floods only S3: the other substations' statuses fold to constants.
    ef = build(star8.network, star8.scenarios, CostSchedule.for_network(star8.network),
               Budget(5), 3, W)
    alpha_w4 = [
        v for v in ef.problem.variables if v.meta and v.meta[0] == "alpha" and v.meta[1] == "w4"
    ]
    assert [v.meta[2] for v in alpha_w4] == ["S3"]
    # w2 floods S2 at level 3 (beyond the cap): pinned dead, no alpha variable.
    alpha_w2 = {v.meta[2] for v in ef.problem.variables if v.meta and v.meta[0] == "alpha" and v.meta[1] == "w2"}
    assert alpha_w2 == {"S3"}


def test_fix_first_stage_matches_recourse_evaluation(star8):
    rng = np.random.default_rng(4)
    sched = CostSchedule.for_network(star8.network)
    ef = build(star8.network, star8.scenarios, sched, Budget(20), 3, W)
    for _ in range(6):
        plan = random_plan(rng, star8.network)
        fixed = fix_first_stage(ef, plan)
        lp = solve_lp(fixed.problem)
        assert lp.status == "optimal"
        expected = evaluate_plan(star8.network, plan, star8.scenarios, W).expected_loss
        assert lp.objective == pytest.approx(expected, abs=1e-6)


def test_fix_first_stage_zero_and_full(star8):
    sched = CostSchedule.for_network(star8.network)
    ef = build(star8.network, star8.scenarios, sched, Budget(50), 3, W)
    for plan in (ZERO_PLAN, MitigationPlan({s.id: 2 for s in star8.network.substations})):
        lp = solve_lp(fix_first_stage(ef, plan).problem)
        expected = evaluate_plan(star8.network, plan, star8.scenarios, W).expected_loss
        assert lp.objective == pytest.approx(expected, abs=1e-6)


def test_fix_first_stage_rejects_infeasible_plan(star8):
    sched = CostSchedule.for_network(star8.network)
    ef = build(star8.network, star8.scenarios, sched, Budget(0), 3, W)
    with pytest.raises(ValueError, match="not feasible"):
        fix_first_stage(ef, MitigationPlan({"S0": 1}))


def _cut_survivors(ef, cut, sched, budget):
    row = cut.problem.rows[-1]
    survivors = set()
    for plan in enumerate_plans(sched, budget, ef.r_hat):
        assignment = {name: float(v) for name, v in ef.plan_assignment(plan).items()}
        act = sum(assignment[cut.problem.variables[i].name] * c for i, c in zip(row.idx, row.coef))
        if act >= row.rhs - 1e-9:
            survivors.add(plan.key())
    return survivors


def test_no_good_cut_of_zero_plan_forbids_only_it(tiny3):
    sched = CostSchedule.for_network(tiny3.network)
    budget = Budget(1)
    ef = build(tiny3.network, tiny3.scenarios, sched, budget, 3, W)
    all_plans = {p.key() for p in enumerate_plans(sched, budget, 3)}
    cut = add_no_good_cut(ef, ZERO_PLAN)
    assert _cut_survivors(ef, cut, sched, budget) == all_plans - {ZERO_PLAN.key()}


def test_no_good_cut_removes_the_plan_and_its_interior(tiny3):
    # Survivors must deploy at least one unit the cut plan left out, so the
    # cut plan and every plan it dominates are removed together.
    sched = CostSchedule.for_network(tiny3.network)
    budget = Budget(1)
    ef = build(tiny3.network, tiny3.scenarios, sched, budget, 3, W)
    full = MitigationPlan({"S1": 1})  # exhausts the budget
    cut = add_no_good_cut(ef, full)
    expected = {
        p.key() for p in enumerate_plans(sched, budget, 3) if not full.dominates(p)
    }
    assert _cut_survivors(ef, cut, sched, budget) == expected
    assert ZERO_PLAN.key() not in expected  # dominated, removed with the plan


def test_no_good_cut_keeps_extensions(star8):
    # Plans that implement the cut plan plus more always survive the row.
    sched = CostSchedule.for_network(star8.network)
    budget = Budget(6)
    ef = build(star8.network, star8.scenarios, sched, budget, 3, W)
    small = MitigationPlan({"S2": 1})  # cost 1, far under budget
    cut = add_no_good_cut(ef, small)
    survivors = _cut_survivors(ef, cut, sched, budget)
    for plan in enumerate_plans(sched, budget, 3):
        assert (plan.key() in survivors) == (not small.dominates(plan)), plan.levels
        if plan.dominates(small) and plan.key() != small.key():
            assert plan.key() in survivors


def test_solution_statuses_match_closure(star8):
    sched = CostSchedule.for_network(star8.network)
    ef = build(star8.network, star8.scenarios, sched, Budget(7), 3, W)
    sol = solve_milp(ef.problem)
    plan = ef.plan_from_values(sol.values)
    for v in ef.problem.variables:
        if not v.meta:
            continue
        kind = v.meta[0]
        if kind == "alpha":
            _, scen_id, sub = v.meta
            scenario = next(s for s in star8.scenarios.scenarios if s.id == scen_id)
            st = status_closure(star8.network, plan, scenario)
            bus = star8.network.substation_buses[sub][0]
            assert round(sol.values[v.name]) == st.alpha[bus], v.name
        elif kind == "beta":
            _, scen_id, br = v.meta
            scenario = next(s for s in star8.scenarios.scenarios if s.id == scen_id)
            st = status_closure(star8.network, plan, scenario)
            assert round(sol.values[v.name]) == st.beta[br], v.name


def test_relax_status_option_same_optimum(star8):
    sched = CostSchedule.for_network(star8.network)
    strict = build(star8.network, star8.scenarios, sched, Budget(5), 3, W)
    relaxed = build(
        star8.network, star8.scenarios, sched, Budget(5), 3, W,
        BuildOptions(relax_status=True),
    )
    assert relaxed.problem.n_binaries < strict.problem.n_binaries
    a = solve_milp(strict.problem)
    b = solve_milp(relaxed.problem)
    assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_with_budget_changes_single_rhs(star8):
    sched = CostSchedule.for_network(star8.network)
    ef = build(star8.network, star8.scenarios, sched, Budget(5), 3, W)
    ef9 = ef.with_budget(9)
    row5 = next(r for r in ef.problem.rows if r.name == "budget")
    row9 = next(r for r in ef9.problem.rows if r.name == "budget")
    assert (row5.rhs, row9.rhs) == (5.0, 9.0)
    assert ef9.problem.n_rows == ef.problem.n_rows


def test_service_level_rows(tiny3):
    sched = CostSchedule.for_network(tiny3.network)
    opts = BuildOptions(service_levels={"B2": 0.4})
    ef = build(tiny3.network, tiny3.scenarios, sched, Budget(2), 3, W, opts)
    names = [r.name for r in ef.problem.rows]
    assert "service_B2" in names
    sol = solve_milp(ef.problem)
    assert sol.status == "optimal"
    # Expected served fraction at B2 across scenarios respects the floor.
    served = sum(
        s.probability * sol.values.get(f"delta_{s.id}_B2", 0.0)
        for s in tiny3.scenarios.scenarios
    )
    assert served >= 0.4 - 1e-9

    with pytest.raises(ValueError, match="zero-load"):
        build(tiny3.network, tiny3.scenarios, sched, Budget(2), 3, W,
              BuildOptions(service_levels={"B3": 0.5}))
    with pytest.raises(ValueError, match="unknown bus"):
        build(tiny3.network, tiny3.scenarios, sched, Budget(2), 3, W,
              BuildOptions(service_levels={"nope": 0.5}))


def test_build_rejects_unknown_scenario_substation(tiny3):
    bad = FloodScenarioSet(
        (FloodScenario("w", 1.0, {"QQ": 1}),), level_count=3, unattainable_level=3
    )
    with pytest.raises(ValueError, match="unknown substations"):
        build(tiny3.network, bad, CostSchedule.for_network(tiny3.network), Budget(1), 3, W)


def test_lp_export_round_trip_stability(tmp_path, tiny3):
    sched = CostSchedule.for_network(tiny3.network)
    ef = build(tiny3.network, tiny3.scenarios, sched, Budget(2), 3, W)
    p1, p2 = tmp_path / "a.lp", tmp_path / "b.lp"
    ef.write_lp(p1)
    ef.write_lp(p2)
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text()
    for section in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
        assert section in text
    assert "budget:" in text
