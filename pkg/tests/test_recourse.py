import numpy as np
import pytest

from conftest import random_network, random_plan, random_scenario_set
from floodmit.grid_model import Branch, Bus, GridNetwork, Substation
from floodmit.mitigation import MitigationPlan, ZERO_PLAN
from floodmit.recourse import (
    LossWeights,
    RecourseEvaluator,
    evaluate_plan,
    solve_recourse_lp,
    status_closure,
)
from floodmit.scenario_model import FloodScenario, FloodScenarioSet


def two_bus_network():
    return GridNetwork(
        buses=(
            Bus("A", "SA", p_gen_min=0.0, p_gen_max=2.0, is_reference=True),
            Bus("B", "SB", p_load=1.0),
        ),
        branches=(Branch("AB", "A", "B", susceptance=-10.0, flow_limit=1.5),),
        substations=(Substation("SA", "115_161"), Substation("SB", "115_161")),
    )


def test_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(0.0, 0.0)
    with pytest.raises(ValueError):
        LossWeights(-1.0, 1.0)


# -- status closure ----------------------------------------------------


def test_closure_unprotected_flood_kills_substation(tiny3):
    st = status_closure(tiny3.network, ZERO_PLAN, FloodScenario("w", 1.0, {"S2": 1}))
    assert st.alpha == {"B1": 1, "B2": 0, "B3": 0}
    assert st.beta == {"L1": 0, "L2": 0}  # incident branches go down too


def test_closure_sufficient_protection(tiny3):
    plan = MitigationPlan({"S2": 2})
    st = status_closure(tiny3.network, plan, FloodScenario("w", 1.0, {"S2": 2}))
    assert st.alpha == {"B1": 1, "B2": 1, "B3": 1}
    assert st.beta == {"L1": 1, "L2": 1}


def test_closure_flood_at_unattainable_level(tiny3):
    # Plans never reach level 3, so a level-3 flood always wins.
    plan = MitigationPlan({"S2": 2})
    st = status_closure(tiny3.network, plan, FloodScenario("w", 1.0, {"S2": 3}))
    assert st.alpha["B2"] == 0 and st.alpha["B3"] == 0


def test_closure_statuses_consistent_within_substation(star8):
    rng = np.random.default_rng(0)
    for _ in range(20):
        plan = random_plan(rng, star8.network)
        scenario = star8.scenarios.scenarios[int(rng.integers(0, 4))]
        st = status_closure(star8.network, plan, scenario)
        for sub, bus_ids in star8.network.substation_buses.items():
            vals = {st.alpha[b] for b in bus_ids}
            assert len(vals) == 1
        for br in star8.network.branches:
            assert st.beta[br.id] == st.alpha[br.from_bus] * st.alpha[br.to_bus]


def test_closure_monotone_in_plan(star8):
    rng = np.random.default_rng(1)
    for _ in range(30):
        base = random_plan(rng, star8.network)
        bigger = MitigationPlan(
            {k: min(2, v + int(rng.integers(0, 2))) for k, v in base.levels.items()}
        )
        for scenario in star8.scenarios.scenarios:
            lo = status_closure(star8.network, base, scenario)
            hi = status_closure(star8.network, bigger, scenario)
            assert all(hi.alpha[b] >= lo.alpha[b] for b in lo.alpha)
            assert all(hi.beta[b] >= lo.beta[b] for b in lo.beta)


# -- dispatch LP ---------------------------------------------------------


def test_two_bus_fully_operational():
    net = two_bus_network()
    st = status_closure(net, ZERO_PLAN, FloodScenario("dry", 1.0, {}))
    loss, disp = solve_recourse_lp(net, st, LossWeights())
    assert loss == pytest.approx(0.0, abs=1e-9)
    assert disp.p_flow["AB"] == pytest.approx(1.0, abs=1e-9)
    assert disp.delta["B"] == pytest.approx(1.0, abs=1e-9)


def test_flooded_load_bus_sheds_its_load():
    net = two_bus_network()
    st = status_closure(net, ZERO_PLAN, FloodScenario("w", 1.0, {"SB": 1}))
    loss, disp = solve_recourse_lp(net, st, LossWeights())
    assert loss >= 1.0 - 1e-9  # at least lambda_shed * p_load
    assert disp.delta["B"] == 0.0
    assert disp.p_flow["AB"] == 0.0  # island consistency


def test_everything_down_total_shed(tiny3):
    st = status_closure(
        tiny3.network, ZERO_PLAN, FloodScenario("w", 1.0, {"S1": 1, "S2": 1})
    )
    loss, disp = solve_recourse_lp(tiny3.network, st, LossWeights())
    assert loss == pytest.approx(tiny3.network.total_load, abs=1e-9)
    assert all(v == 0.0 for v in disp.p_hat.values())
    assert all(v == 0.0 for v in disp.p_flow.values())


def test_forced_minimum_generation_pays_overgen():
    # Islanded generator with a positive lower bound and no load: the slack
    # absorbs the forced output at cost lambda_over per unit.
    net = GridNetwork(
        buses=(Bus("G", "SG", p_gen_min=0.5, p_gen_max=1.0, is_reference=True),),
        branches=(),
        substations=(Substation("SG", "115_161"),),
    )
    st = status_closure(net, ZERO_PLAN, FloodScenario("dry", 1.0, {}))
    loss, disp = solve_recourse_lp(net, st, LossWeights(lambda_shed=1.0, lambda_over=2.0))
    assert loss == pytest.approx(1.0, abs=1e-9)  # 2.0 * 0.5
    assert disp.p_hat["G"] == pytest.approx(0.5)
    assert disp.p_check["G"] == pytest.approx(0.5)


def test_delta_zero_when_cut_off_from_generation():
    # Operational load bus with no path to any generator: balance forces
    # its served fraction to zero without any dedicated constraint.
    net = GridNetwork(
        buses=(
            Bus("A", "SA", p_gen_min=0.0, p_gen_max=2.0, is_reference=True),
            Bus("B", "SB", p_load=1.0),
        ),
        branches=(),
        substations=(Substation("SA", "115_161"), Substation("SB", "115_161")),
    )
    st = status_closure(net, ZERO_PLAN, FloodScenario("dry", 1.0, {}))
    loss, disp = solve_recourse_lp(net, st, LossWeights())
    assert disp.delta["B"] == pytest.approx(0.0, abs=1e-9)
    assert loss == pytest.approx(1.0, abs=1e-9)


def test_flow_limit_binds():
    net = GridNetwork(
        buses=(
            Bus("A", "SA", p_gen_min=0.0, p_gen_max=5.0, is_reference=True),
            Bus("B", "SB", p_load=2.0),
        ),
        branches=(Branch("AB", "A", "B", susceptance=-10.0, flow_limit=1.2),),
        substations=(Substation("SA", "115_161"), Substation("SB", "115_161")),
    )
    st = status_closure(net, ZERO_PLAN, FloodScenario("dry", 1.0, {}))
    loss, disp = solve_recourse_lp(net, st, LossWeights())
    assert disp.p_flow["AB"] == pytest.approx(1.2, abs=1e-9)
    assert loss == pytest.approx(0.8, abs=1e-9)  # 2.0 - 1.2 shed


def test_angle_difference_limits_flow():
    # |flow| = |b| * |angle spread| <= |b| * diff_max = 2 * 0.1 = 0.2.
    net = GridNetwork(
        buses=(
            Bus("A", "SA", p_gen_min=0.0, p_gen_max=5.0, is_reference=True),
            Bus("B", "SB", p_load=1.0),
        ),
        branches=(Branch("AB", "A", "B", susceptance=-2.0, flow_limit=5.0),),
        substations=(Substation("SA", "115_161"), Substation("SB", "115_161")),
        angle_abs_max=1.0,
        angle_diff_max=0.1,
    )
    st = status_closure(net, ZERO_PLAN, FloodScenario("dry", 1.0, {}))
    loss, disp = solve_recourse_lp(net, st, LossWeights())
    assert abs(disp.p_flow["AB"]) <= 0.2 + 1e-9
    assert loss == pytest.approx(0.8, abs=1e-9)


# -- plan evaluation ------------------------------------------------------


def test_evaluate_zero_flood_equals_intact_loss(tiny3):
    dry = FloodScenarioSet(
        (FloodScenario("dry", 1.0, {}),), level_count=3, unattainable_level=3
    )
    ev = evaluate_plan(tiny3.network, ZERO_PLAN, dry)
    st = status_closure(tiny3.network, ZERO_PLAN, dry.scenarios[0])
    loss, _ = solve_recourse_lp(tiny3.network, st, LossWeights())
    assert ev.expected_loss == pytest.approx(loss, abs=1e-12)


def test_evaluate_single_scenario_probability_one(tiny3):
    ss = FloodScenarioSet(
        (FloodScenario("w", 1.0, {"S1": 1}),), level_count=3, unattainable_level=3
    )
    ev = evaluate_plan(tiny3.network, ZERO_PLAN, ss)
    assert ev.expected_loss == pytest.approx(ev.outcomes[0].loss)


def test_full_mitigation_hits_positive_floor_with_inexorable_flood(star8):
    # Protect everything preventable; the level-3 floods still bite.
    full = MitigationPlan({s.id: 2 for s in star8.network.substations})
    ev = evaluate_plan(star8.network, full, star8.scenarios)
    assert ev.expected_loss > 0
    worse = evaluate_plan(star8.network, ZERO_PLAN, star8.scenarios)
    assert ev.expected_loss < worse.expected_loss


def test_loss_monotone_in_plan(star8):
    rng = np.random.default_rng(2)
    evaluator = RecourseEvaluator(star8.network, LossWeights())
    for _ in range(15):
        base = random_plan(rng, star8.network)
        bigger = MitigationPlan({k: min(2, v + 1) for k, v in base.levels.items()})
        lo = evaluator.evaluate(bigger, star8.scenarios).expected_loss
        hi = evaluator.evaluate(base, star8.scenarios).expected_loss
        assert lo <= hi + 1e-6


def test_loss_upper_bound(star8):
    rng = np.random.default_rng(3)
    w = LossWeights(1.0, 1.5)
    evaluator = RecourseEvaluator(star8.network, w)
    bound = w.lambda_shed * star8.network.total_load + w.lambda_over * sum(
        max(b.p_gen_min, 0.0) for b in star8.network.buses
    )
    for _ in range(10):
        plan = random_plan(rng, star8.network)
        ev = evaluator.evaluate(plan, star8.scenarios)
        for o in ev.outcomes:
            assert o.loss <= bound + 1e-9


def test_relatively_complete_recourse_randomized():
    # Dispatch stays feasible for every (network, scenario, plan) triple.
    rng = np.random.default_rng(20250101)
    for _ in range(120):
        net = random_network(rng)
        ss = random_scenario_set(rng, net)
        plan = random_plan(rng, net)
        for scenario in ss.scenarios:
            st = status_closure(net, plan, scenario)
            loss, _ = solve_recourse_lp(net, st, LossWeights())
            assert np.isfinite(loss) and loss >= -1e-9


def test_evaluator_cache_consistency(star8):
    evaluator = RecourseEvaluator(star8.network, LossWeights())
    plan = MitigationPlan({"S1": 2})
    a = evaluator.evaluate(plan, star8.scenarios).expected_loss
    b = evaluate_plan(star8.network, plan, star8.scenarios)
    assert a == pytest.approx(b.expected_loss, abs=1e-12)
