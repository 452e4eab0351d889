"""Budget sweeps and solution diagnostics.

The sweep solves the planning problem at every integer budget in ascending
order.  The feasible first-stage space only grows with the budget, so prior
optima stay feasible and join the greedy portfolio as warm starts, and the
final simplex basis of one budget seeds the root relaxation of the next
(only the budget right-hand side changes).  Objectives are therefore
monotone nonincreasing across the sweep, while the plans themselves usually
are not nested; the diagnostics here quantify that.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .extensive_form import BuildOptions, ExtensiveForm, build
from .grid_model import GridNetwork
from .heuristic import portfolio
from .mitigation import Budget, CostSchedule, MitigationPlan, ZERO_PLAN, max_useful_budget, plan_cost
from .recourse import LossWeights, RecourseEvaluator, status_closure
from .scenario_model import FloodScenarioSet
from . import solver

log = logging.getLogger("floodmit.analysis")

OBJECTIVE_TOL = 1e-6


@dataclass(frozen=True)
class SparedCapacity:
    """Expected share (and per-unit amount) of lost capacity that a plan saves."""

    load_proportion: float
    gen_proportion: float
    flow_proportion: float
    load_abs: float
    gen_abs: float
    flow_abs: float


@dataclass
class SweepRow:
    budget: int
    status: str
    objective: float | None
    plan: MitigationPlan | None
    plan_cost: int | None
    spared: SparedCapacity | None
    heuristic_best: float | None
    heuristic_gap: float | None
    nodes: int = 0
    lp_iterations: int = 0
    unique: bool | None = None
    uniqueness_witness: MitigationPlan | None = None
    uniqueness_caveat: bool = False


@dataclass(frozen=True)
class Transition:
    substation: str
    budget: int  # the budget at which the new level first applies
    from_level: int
    to_level: int

    @property
    def direction(self) -> str:
        return "up" if self.to_level > self.from_level else "down"


@dataclass
class SweepReport:
    rows: list[SweepRow]
    transitions: list[Transition]
    r_hat: int
    weights: LossWeights
    f_max: int
    relax_status: bool = False


@dataclass
class NestednessReport:
    violations: list[Transition]  # downward moves: larger budget protects less
    transition_counts: dict[str, int]
    # (substation, level r) -> (first budget reaching r+1, last upward crossing budget)
    crossing_intervals: dict[tuple[str, int], tuple[int, int]] = field(default_factory=dict)

    @property
    def nested(self) -> bool:
        return not self.violations


def spared_capacity(
    plan: MitigationPlan,
    network: GridNetwork,
    scenario_set: FloodScenarioSet,
) -> SparedCapacity:
    """Expected proportion of flood-lost capacity that the plan keeps running.

    Per scenario, the baseline statuses come from the zero plan; the ratio of
    spared to lost capacity is averaged over scenarios with a scenario
    contributing zero when it loses nothing (there is nothing to spare).
    """
    props = [0.0, 0.0, 0.0]
    absol = [0.0, 0.0, 0.0]
    for scenario in scenario_set.scenarios:
        base = status_closure(network, ZERO_PLAN, scenario)
        mit = status_closure(network, plan, scenario)
        spared_load = lost_load = 0.0
        spared_gen = lost_gen = 0.0
        for bus in network.buses:
            gain = mit.alpha[bus.id] - base.alpha[bus.id]
            lost = 1 - base.alpha[bus.id]
            spared_load += gain * bus.p_load
            lost_load += lost * bus.p_load
            spared_gen += gain * bus.p_gen_max
            lost_gen += lost * bus.p_gen_max
        spared_flow = lost_flow = 0.0
        for br in network.branches:
            spared_flow += (mit.beta[br.id] - base.beta[br.id]) * br.flow_limit
            lost_flow += (1 - base.beta[br.id]) * br.flow_limit
        p = scenario.probability
        for slot, (num, den) in enumerate(
            ((spared_load, lost_load), (spared_gen, lost_gen), (spared_flow, lost_flow))
        ):
            if den > 0:
                props[slot] += p * num / den
            absol[slot] += p * num
    return SparedCapacity(
        load_proportion=props[0],
        gen_proportion=props[1],
        flow_proportion=props[2],
        load_abs=absol[0],
        gen_abs=absol[1],
        flow_abs=absol[2],
    )


def _warm_pool(
    ef: ExtensiveForm,
    plans: list[MitigationPlan],
    evaluator: RecourseEvaluator,
    scenario_set: FloodScenarioSet,
) -> list[solver.WarmStartPlan]:
    pool = []
    seen = set()
    for i, plan in enumerate(plans):
        if plan.key() in seen:
            continue
        seen.add(plan.key())
        value = evaluator.evaluate(plan, scenario_set).expected_loss
        pool.append(
            solver.WarmStartPlan(ef.plan_assignment(plan), value, label=f"pool{i}")
        )
    return pool


def solve_instance(
    ef: ExtensiveForm,
    warm_plans: list[MitigationPlan],
    evaluator: RecourseEvaluator,
    root_basis=None,
    check_unique: bool = False,
) -> tuple[solver.MilpSolution, MitigationPlan, dict]:
    """Solve one budget instance with warm starts; optionally probe uniqueness."""
    pool = _warm_pool(ef, warm_plans, evaluator, ef.scenario_set)
    config = solver.BnbConfig(warm_starts=pool, root_warm_basis=root_basis)
    sol = solver.solve_milp(ef.problem, config)
    if sol.status != "optimal":
        raise solver.SolverError(f"budget {ef.budget.units}: solver stopped with {sol.status}")
    plan = ef.plan_from_values(sol.values)
    extras: dict = {}
    if check_unique:
        assignment = ef.plan_assignment(plan)
        unique, witness = solver.check_uniqueness(ef.problem, assignment, sol.objective)
        extras["unique"] = unique
        extras["witness"] = None if witness is None else ef.plan_from_values(
            {k: float(v) for k, v in witness.items()}
        )
        extras["caveat"] = plan_cost(plan, ef.schedule) < ef.budget.units
    return sol, plan, extras


def sweep(
    network: GridNetwork,
    scenario_set: FloodScenarioSet,
    schedule: CostSchedule,
    r_hat: int,
    weights: LossWeights = LossWeights(),
    f_max: int | None = None,
    check_unique: bool = False,
    options: BuildOptions | None = None,
) -> SweepReport:
    """Solve every budget 0..f_max ascending, chaining warm starts.

    A budget whose solve fails is recorded with an error status and the sweep
    continues.
    """
    if f_max is None:
        f_max = max_useful_budget(network, scenario_set, schedule, r_hat)
    evaluator = RecourseEvaluator(network, weights)
    base = build(network, scenario_set, schedule, Budget(f_max), r_hat, weights, options)

    rows: list[SweepRow] = []
    prior_plans: list[MitigationPlan] = []
    root_basis = None
    for f in range(0, f_max + 1):
        ef = base.with_budget(f)
        greedy_plans = portfolio(Budget(f), network, scenario_set, schedule, r_hat)
        warm_plans = greedy_plans + prior_plans
        heur_best = min(
            evaluator.evaluate(p, scenario_set).expected_loss for p in greedy_plans
        )
        try:
            sol, plan, extras = solve_instance(
                ef, warm_plans, evaluator, root_basis=root_basis, check_unique=check_unique
            )
        except solver.SolverError as exc:
            log.error("budget %d failed: %s", f, exc)
            rows.append(
                SweepRow(
                    budget=f, status="error", objective=None, plan=None, plan_cost=None,
                    spared=None, heuristic_best=heur_best, heuristic_gap=None,
                )
            )
            continue
        root_basis = sol.root_basis
        prior_plans.append(plan)
        gap = None
        if heur_best is not None and sol.objective > 0:
            gap = (heur_best - sol.objective) / sol.objective
        elif heur_best is not None:
            gap = heur_best - sol.objective
        rows.append(
            SweepRow(
                budget=f,
                status="optimal",
                objective=sol.objective,
                plan=plan,
                plan_cost=plan_cost(plan, schedule),
                spared=spared_capacity(plan, network, scenario_set),
                heuristic_best=heur_best,
                heuristic_gap=gap,
                nodes=sol.nodes_explored,
                lp_iterations=sol.lp_iterations,
                unique=extras.get("unique"),
                uniqueness_witness=extras.get("witness"),
                uniqueness_caveat=extras.get("caveat", False),
            )
        )
        log.info("budget %d: objective %.6f plan %s", f, sol.objective, plan.levels)

    transitions = []
    for prev, cur in zip(rows, rows[1:]):
        if prev.plan is None or cur.plan is None:
            continue
        subs = sorted(set(prev.plan.levels) | set(cur.plan.levels))
        for sub in subs:
            a, b = prev.plan.level_of(sub), cur.plan.level_of(sub)
            if a != b:
                transitions.append(Transition(substation=sub, budget=cur.budget, from_level=a, to_level=b))

    return SweepReport(
        rows=rows,
        transitions=transitions,
        r_hat=r_hat,
        weights=weights,
        f_max=f_max,
        relax_status=bool(options and options.relax_status),
    )


def nestedness(report: SweepReport) -> NestednessReport:
    """Where do larger budgets protect less?  Empirically they often do."""
    if len(report.rows) < 2:
        raise ValueError("nestedness needs at least two budgets")
    violations = [t for t in report.transitions if t.to_level < t.from_level]
    counts: dict[str, int] = {}
    for t in report.transitions:
        counts[t.substation] = counts.get(t.substation, 0) + 1

    crossings: dict[tuple[str, int], list[int]] = {}
    for prev, cur in zip(report.rows, report.rows[1:]):
        if prev.plan is None or cur.plan is None:
            continue
        for sub in set(prev.plan.levels) | set(cur.plan.levels):
            a, b = prev.plan.level_of(sub), cur.plan.level_of(sub)
            for r in range(a, b):  # upward crossings r -> r+1
                crossings.setdefault((sub, r), []).append(cur.budget)
    intervals = {key: (min(v), max(v)) for key, v in crossings.items()}
    return NestednessReport(
        violations=violations, transition_counts=counts, crossing_intervals=intervals
    )


@dataclass
class RhatComparison:
    r_hat: int
    objective: float
    plan: MitigationPlan
    plan_diff: dict[str, tuple[int, int]]  # substation -> (level at base r_hat, level here)


def compare_rhat(
    network: GridNetwork,
    scenario_set: FloodScenarioSet,
    schedule: CostSchedule,
    weights: LossWeights,
    f: int,
    r_hat_values: tuple[int, ...] = (3, 4),
    options: BuildOptions | None = None,
) -> list[RhatComparison]:
    """Optimal objective and plan at a fixed budget for each attainability cap.

    A larger cap enlarges the feasible first-stage set, so objectives must be
    ordered accordingly; a violation indicates a solver defect and raises.
    """
    for r_hat in r_hat_values:
        if r_hat < 2:
            raise ValueError("r_hat must be at least 2 to allow any mitigation")
    results: list[RhatComparison] = []
    evaluator = RecourseEvaluator(network, weights)
    for r_hat in r_hat_values:
        ef = build(network, scenario_set, schedule, Budget(f), r_hat, weights, options)
        warm = portfolio(Budget(f), network, scenario_set, schedule, r_hat)
        sol, plan, _ = solve_instance(ef, warm, evaluator)
        results.append(RhatComparison(r_hat=r_hat, objective=sol.objective, plan=plan, plan_diff={}))

    base = results[0]
    for res in results:
        subs = sorted(set(base.plan.levels) | set(res.plan.levels))
        res.plan_diff = {
            s: (base.plan.level_of(s), res.plan.level_of(s))
            for s in subs
            if base.plan.level_of(s) != res.plan.level_of(s)
        }
    ordered = sorted(results, key=lambda r: r.r_hat)
    for small, big in zip(ordered, ordered[1:]):
        if big.objective > small.objective + OBJECTIVE_TOL:
            raise solver.SolverError(
                f"objective regressed when raising the attainable cap: "
                f"{small.r_hat}->{big.r_hat} gave {small.objective}->{big.objective}"
            )
    return results
