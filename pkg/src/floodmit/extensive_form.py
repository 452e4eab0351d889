"""Assembly of the full planning MILP over all flooding scenarios.

One problem holds the first-stage barrier decisions (cumulative binaries per
substation and level, a budget row) plus, per scenario, the status binaries
and the dispatch block.  The status logic

    alpha = product over levels of (1 - xi * (1 - x)),    beta = alpha * alpha

is linearized exactly: at binary first-stage decisions the linear rows force
the statuses to the product values, so branching on the first stage alone
solves the whole problem.

Constant folding keeps the model small: a substation dry in a scenario has
alpha pinned to 1, a substation flooded beyond the attainable level has alpha
pinned to 0, branches with a pinned-dead endpoint vanish, and a branch whose
other endpoint is pinned alive aliases its beta to the live endpoint's alpha
variable instead of spending a new binary and three link rows.  Live fixed
branches fold their angle-difference limit into the flow bound through Ohm's
law.  Out-of-service branches get the classic pair of big-M rows that free
the Ohm equality, with the per-branch constant |b| * 2*theta_max + flow_limit,
which is the smallest value that deactivates the equality at every feasible
angle/flow combination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .grid_model import GridNetwork
from .milp import MilpProblem, ProblemBuilder, Row, sanitize_name, with_no_good_cut, write_lp_file, write_lp_text
from .mitigation import Budget, CostSchedule, MitigationPlan, is_feasible, plan_cost
from .recourse import LossWeights
from .scenario_model import FloodScenarioSet

import numpy as np

BUDGET_ROW = "budget"


@dataclass(frozen=True)
class BigMPolicy:
    """Per-branch deactivation constants for the Ohm big-M rows."""

    per_branch: dict[str, float]

    @classmethod
    def for_network(cls, network: GridNetwork) -> "BigMPolicy":
        return cls(
            {
                br.id: abs(br.susceptance) * 2 * network.angle_abs_max + br.flow_limit
                for br in network.branches
            }
        )

    def check(self, network: GridNetwork) -> None:
        for br in network.branches:
            floor = abs(br.susceptance) * 2 * network.angle_abs_max + br.flow_limit
            if self.per_branch.get(br.id, -math.inf) < floor - 1e-12:
                raise ValueError(f"big-M for branch {br.id} below the safe floor {floor}")


@dataclass(frozen=True)
class BuildOptions:
    relax_status: bool = False
    service_levels: dict[str, float] | None = None
    big_m: BigMPolicy | None = None


def alpha_link_rows(xi):
    """Linear rows tying a status variable to first-stage decisions.

    ``xi`` is the 0/1 flooding indicator row over levels 1..R.  Returns
    ('const', value) when no row is needed, else ('rows', rows) where each row
    is (alpha_coef, {level: x_coef}, sense, rhs).  Rows for dry levels are the
    vacuous alpha <= 1 and are omitted.  The construction is exact for any
    binary indicator row, cumulative or not.
    """
    flooded = []
    for pos, v in enumerate(xi, start=1):
        if v not in (0, 1):
            raise ValueError("indicator entries must be 0/1")
        if v == 1:
            flooded.append(pos)
    if not flooded:
        return ("const", 1)
    rows = []
    for r in flooded:
        rows.append((1.0, {r: -1.0}, "L", 0.0))
    rows.append((1.0, {r: -1.0 for r in flooded}, "G", 1.0 - len(flooded)))
    return ("rows", rows)


@dataclass
class ExtensiveForm:
    """Built problem plus the maps needed to read plans in and out."""

    problem: MilpProblem
    network: GridNetwork
    scenario_set: FloodScenarioSet
    schedule: CostSchedule
    budget: Budget
    r_hat: int
    weights: LossWeights
    x_names: dict[tuple[str, int], str]
    stats: dict = field(default_factory=dict)

    def free_x_names(self) -> dict[tuple[str, int], str]:
        return {(k, r): n for (k, r), n in self.x_names.items() if r < self.r_hat}

    def plan_assignment(self, plan: MitigationPlan) -> dict[str, int]:
        """Warm-start assignment of the free first-stage binaries."""
        return {
            name: 1 if plan.level_of(sub) >= r else 0
            for (sub, r), name in self.free_x_names().items()
        }

    def plan_from_values(self, values: dict[str, float]) -> MitigationPlan:
        levels: dict[str, int] = {}
        for (sub, r), name in self.x_names.items():
            if values.get(name, 0.0) > 0.5:
                levels[sub] = max(levels.get(sub, 0), r)
        return MitigationPlan(levels)

    def with_budget(self, units: int) -> "ExtensiveForm":
        return replace(
            self,
            problem=self.problem.with_rhs(BUDGET_ROW, float(units)),
            budget=Budget(units),
        )

    def write_lp(self, path) -> None:
        write_lp_file(self.problem, path)

    def lp_text(self) -> str:
        return write_lp_text(self.problem)


def build(
    network: GridNetwork,
    scenario_set: FloodScenarioSet,
    schedule: CostSchedule,
    budget: Budget,
    r_hat: int,
    weights: LossWeights = LossWeights(),
    options: BuildOptions | None = None,
) -> ExtensiveForm:
    """Assemble the deterministic-equivalent MILP.

    Raises on dimension mismatches (scenario substations unknown to the
    network, schedule gaps) and on service levels named for zero-load buses.
    """
    options = options or BuildOptions()
    if r_hat < 1:
        raise ValueError("r_hat must be >= 1")
    known_subs = {s.id for s in network.substations}
    for s in scenario_set.scenarios:
        unknown = set(s.levels) - known_subs
        if unknown:
            raise ValueError(f"scenario {s.id} floods unknown substations {sorted(unknown)}")
    for sub in known_subs:
        if sub not in schedule.base_units:
            raise ValueError(f"cost schedule missing substation {sub}")

    big_m = options.big_m or BigMPolicy.for_network(network)
    big_m.check(network)

    load_by_bus = {b.id: b.p_load for b in network.buses}
    if options.service_levels:
        for bus_id, floor in options.service_levels.items():
            if bus_id not in load_by_bus:
                raise ValueError(f"service level names unknown bus {bus_id}")
            if load_by_bus[bus_id] <= 0:
                raise ValueError(f"service level on zero-load bus {bus_id} rejected")
            if not 0 <= floor <= 1:
                raise ValueError("service levels must lie in [0, 1]")

    pb = ProblemBuilder("extensive_form")
    binary_status = not options.relax_status

    # -- first stage ------------------------------------------------------
    x_names: dict[tuple[str, int], str] = {}
    x_idx: dict[tuple[str, int], int] = {}
    budget_terms = []
    for sub in network.substations:
        safe = sanitize_name(sub.id)
        for r in range(1, r_hat + 1):
            name = f"x_{safe}_{r}"
            ub = 0.0 if r == r_hat else 1.0  # the top level is unattainable
            idx = pb.add_variable(name, 0.0, ub, binary=True, meta=("x", sub.id, r))
            x_names[(sub.id, r)] = name
            x_idx[(sub.id, r)] = idx
            budget_terms.append((idx, float(schedule.marginal_cost(sub.id, r))))
        for r in range(1, r_hat):
            # Stacking is cumulative: level r+1 implies level r.
            pb.add_row(
                f"cum_{safe}_{r}",
                [(x_idx[(sub.id, r + 1)], 1.0), (x_idx[(sub.id, r)], -1.0)],
                "L",
                0.0,
            )
    pb.add_row(BUDGET_ROW, budget_terms, "L", float(budget.units))

    # -- per-scenario blocks ----------------------------------------------
    n_alpha_vars = 0
    n_beta_vars = 0
    sub_of_bus = {b.id: b.substation_id for b in network.buses}

    service_terms: dict[str, list[tuple[int, float]]] = (
        {bus_id: [] for bus_id in options.service_levels} if options.service_levels else {}
    )
    service_consts: dict[str, float] = (
        {bus_id: 0.0 for bus_id in options.service_levels} if options.service_levels else {}
    )

    for scenario in scenario_set.scenarios:
        tag = sanitize_name(scenario.id)
        prob = scenario.probability

        # Substation statuses: fold constants, link variables.
        alpha_const: dict[str, int] = {}
        alpha_var: dict[str, int] = {}
        for sub in network.substations:
            level = scenario.level_of(sub.id)
            if level == 0:
                alpha_const[sub.id] = 1
            elif level >= r_hat:
                # Flooding at or beyond the unattainable level.
                alpha_const[sub.id] = 0
            else:
                name = f"alpha_{tag}_{sanitize_name(sub.id)}"
                idx = pb.add_variable(
                    name, 0.0, 1.0, binary=binary_status, meta=("alpha", scenario.id, sub.id)
                )
                alpha_var[sub.id] = idx
                n_alpha_vars += 1
                xi = [1 if r <= level else 0 for r in range(1, r_hat + 1)]
                kind, rows = "rows", alpha_link_rows(xi)[1]
                for rno, (a_coef, x_coefs, sense, rhs) in enumerate(rows):
                    terms = [(idx, a_coef)] + [
                        (x_idx[(sub.id, r)], coef) for r, coef in x_coefs.items()
                    ]
                    pb.add_row(f"a{rno}_{tag}_{sanitize_name(sub.id)}", terms, sense, rhs)

        def bus_alpha(bus_id: str):
            """('const', v) or ('var', idx) for the bus's substation."""
            sub = sub_of_bus[bus_id]
            if sub in alpha_var:
                return ("var", alpha_var[sub])
            return ("const", alpha_const[sub])

        # Branch statuses.
        beta_const: dict[str, int] = {}
        beta_var: dict[str, int] = {}
        for br in network.branches:
            fa = bus_alpha(br.from_bus)
            ta = bus_alpha(br.to_bus)
            if fa[0] == "const" and fa[1] == 0 or ta[0] == "const" and ta[1] == 0:
                beta_const[br.id] = 0
            elif fa[0] == "const" and ta[0] == "const":
                beta_const[br.id] = 1
            elif fa[0] == "const":
                beta_var[br.id] = ta[1]  # beta == the other endpoint's alpha
            elif ta[0] == "const":
                beta_var[br.id] = fa[1]
            elif fa[1] == ta[1]:
                beta_var[br.id] = fa[1]  # both buses share one substation
            else:
                name = f"beta_{tag}_{sanitize_name(br.id)}"
                idx = pb.add_variable(
                    name, 0.0, 1.0, binary=binary_status, meta=("beta", scenario.id, br.id)
                )
                beta_var[br.id] = idx
                n_beta_vars += 1
                safe = sanitize_name(br.id)
                pb.add_row(f"bg_{tag}_{safe}", [(idx, 1.0), (fa[1], -1.0), (ta[1], -1.0)], "G", -1.0)
                pb.add_row(f"bf_{tag}_{safe}", [(idx, 1.0), (fa[1], -1.0)], "L", 0.0)
                pb.add_row(f"bt_{tag}_{safe}", [(idx, 1.0), (ta[1], -1.0)], "L", 0.0)

        # Dispatch variables.
        theta_idx: dict[str, int] = {}
        phat_idx: dict[str, int] = {}
        pchk_idx: dict[str, int] = {}
        delta_idx: dict[str, int] = {}
        for bus in network.buses:
            safe = sanitize_name(bus.id)
            a = bus_alpha(bus.id)
            dead = a[0] == "const" and a[1] == 0
            t_lo = -network.angle_abs_max
            t_hi = network.angle_abs_max
            if bus.is_reference:
                t_lo = t_hi = 0.0
            theta_idx[bus.id] = pb.add_variable(
                f"theta_{tag}_{safe}", t_lo, t_hi, meta=("theta", scenario.id, bus.id)
            )
            if dead:
                # Every incident branch is pinned dead, so the balance row
                # would read 0 = 0; the whole block folds away.
                continue
            has_gen = bus.p_gen_max > 0 or bus.p_gen_min != 0
            if has_gen:
                if a[0] == "const":
                    g_lo, g_hi = bus.p_gen_min, bus.p_gen_max
                else:
                    g_lo, g_hi = min(bus.p_gen_min, 0.0), max(bus.p_gen_max, 0.0)
                phat_idx[bus.id] = pb.add_variable(
                    f"phat_{tag}_{safe}", g_lo, g_hi, meta=("phat", scenario.id, bus.id)
                )
                if a[0] == "var":
                    if bus.p_gen_max != 0:
                        pb.add_row(
                            f"gu_{tag}_{safe}",
                            [(phat_idx[bus.id], 1.0), (a[1], -bus.p_gen_max)],
                            "L",
                            0.0,
                        )
                    if bus.p_gen_min != 0:
                        pb.add_row(
                            f"gl_{tag}_{safe}",
                            [(phat_idx[bus.id], 1.0), (a[1], -bus.p_gen_min)],
                            "G",
                            0.0,
                        )
                if bus.p_gen_max > 0:
                    pchk_idx[bus.id] = pb.add_variable(
                        f"pchk_{tag}_{safe}", 0.0, max(bus.p_gen_max, 0.0),
                        meta=("pchk", scenario.id, bus.id),
                    )
                    pb.add_objective_term(pchk_idx[bus.id], prob * weights.lambda_over)
                    pb.add_row(
                        f"og_{tag}_{safe}",
                        [(pchk_idx[bus.id], 1.0), (phat_idx[bus.id], -1.0)],
                        "L",
                        0.0,
                    )
            if bus.p_load > 0:
                delta_idx[bus.id] = pb.add_variable(
                    f"delta_{tag}_{safe}", 0.0, 1.0, meta=("delta", scenario.id, bus.id)
                )
                pb.add_objective_term(delta_idx[bus.id], -prob * weights.lambda_shed * bus.p_load)
                if a[0] == "var":
                    # Load at a dead bus cannot be served.
                    pb.add_row(
                        f"ds_{tag}_{safe}", [(delta_idx[bus.id], 1.0), (a[1], -1.0)], "L", 0.0
                    )
                if bus.id in service_terms:
                    service_terms[bus.id].append((delta_idx[bus.id], prob))
        # Loads always enter the objective constant; served fractions subtract.
        pb.add_objective_offset(prob * weights.lambda_shed * network.total_load)

        # Branch flow variables and rows.
        flow_idx: dict[str, int] = {}
        for br in network.branches:
            safe = sanitize_name(br.id)
            nf, nt = theta_idx[br.from_bus], theta_idx[br.to_bus]
            if br.id in beta_const:
                if beta_const[br.id] == 0:
                    continue  # pinned flow 0, angle rows vacuous within theta bounds
                limit = min(br.flow_limit, abs(br.susceptance) * network.angle_diff_max)
                f_idx = pb.add_variable(
                    f"flow_{tag}_{safe}", -limit, limit, meta=("flow", scenario.id, br.id)
                )
                flow_idx[br.id] = f_idx
                pb.add_row(
                    f"ohm_{tag}_{safe}",
                    [(f_idx, 1.0), (nf, br.susceptance), (nt, -br.susceptance)],
                    "E",
                    0.0,
                )
                continue
            beta = beta_var[br.id]
            f_idx = pb.add_variable(
                f"flow_{tag}_{safe}", -br.flow_limit, br.flow_limit,
                meta=("flow", scenario.id, br.id),
            )
            flow_idx[br.id] = f_idx
            m_val = big_m.per_branch[br.id]
            # -flow - b*(theta_f - theta_t) sits in [M*(beta-1), M*(1-beta)].
            pb.add_row(
                f"ohmlo_{tag}_{safe}",
                [(f_idx, -1.0), (nf, -br.susceptance), (nt, br.susceptance), (beta, -m_val)],
                "G",
                -m_val,
            )
            pb.add_row(
                f"ohmhi_{tag}_{safe}",
                [(f_idx, -1.0), (nf, -br.susceptance), (nt, br.susceptance), (beta, m_val)],
                "L",
                m_val,
            )
            spread = 2 * network.angle_abs_max - network.angle_diff_max
            if spread > 0:
                # Angle spread tightens from 2*abs_max to diff_max when live.
                pb.add_row(
                    f"adhi_{tag}_{safe}",
                    [(nf, 1.0), (nt, -1.0), (beta, spread)],
                    "L",
                    2 * network.angle_abs_max,
                )
                pb.add_row(
                    f"adlo_{tag}_{safe}",
                    [(nf, 1.0), (nt, -1.0), (beta, -spread)],
                    "G",
                    -2 * network.angle_abs_max,
                )
            pb.add_row(f"fhi_{tag}_{safe}", [(f_idx, 1.0), (beta, -br.flow_limit)], "L", 0.0)
            pb.add_row(f"flo_{tag}_{safe}", [(f_idx, 1.0), (beta, br.flow_limit)], "G", 0.0)

        # Nodal balance for buses that are not pinned dead.
        for bus in network.buses:
            a = bus_alpha(bus.id)
            if a[0] == "const" and a[1] == 0:
                continue
            terms = []
            if bus.id in phat_idx:
                terms.append((phat_idx[bus.id], 1.0))
            if bus.id in pchk_idx:
                terms.append((pchk_idx[bus.id], -1.0))
            if bus.id in delta_idx:
                terms.append((delta_idx[bus.id], -bus.p_load))
            for br_id in network.branches_at_bus[bus.id]:
                if br_id not in flow_idx:
                    continue
                br = network.branch_by_id[br_id]
                terms.append((flow_idx[br_id], 1.0 if br.to_bus == bus.id else -1.0))
            pb.add_row(f"kcl_{tag}_{sanitize_name(bus.id)}", terms, "E", 0.0)

    if options.service_levels:
        for bus_id, floor in options.service_levels.items():
            # Scenarios where the bus is pinned dead contribute zero service.
            pb.add_row(f"service_{sanitize_name(bus_id)}", service_terms[bus_id], "G", floor)

    problem = pb.build()
    ef = ExtensiveForm(
        problem=problem,
        network=network,
        scenario_set=scenario_set,
        schedule=schedule,
        budget=budget,
        r_hat=r_hat,
        weights=weights,
        x_names=x_names,
    )
    ef.stats = {
        "variables": problem.n_variables,
        "rows": problem.n_rows,
        "binaries": problem.n_binaries,
        "alpha_variables": n_alpha_vars,
        "beta_variables": n_beta_vars,
        "scenarios": len(scenario_set.scenarios),
    }
    return ef


def add_no_good_cut(ef: ExtensiveForm, plan: MitigationPlan, tag: str = "") -> ExtensiveForm:
    """Exclude ``plan`` from the first-stage space.

    The appended row requires at least one deployment outside the plan's
    support, so the plan and every plan it dominates are removed together;
    plans extending it survive.
    """
    if not is_feasible(plan, ef.schedule, ef.budget, ef.r_hat):
        raise ValueError("cut plan is not feasible for this problem")
    assignment = ef.plan_assignment(plan)
    return replace(ef, problem=with_no_good_cut(ef.problem, assignment, tag=tag))


def fix_first_stage(ef: ExtensiveForm, plan: MitigationPlan) -> ExtensiveForm:
    """Pin the first-stage binaries to ``plan``; scenarios then decouple."""
    if not is_feasible(plan, ef.schedule, ef.budget, ef.r_hat):
        raise ValueError("plan is not feasible for this problem")
    fixings = {
        name: (1.0, 1.0) if plan.level_of(sub) >= r else (0.0, 0.0)
        for (sub, r), name in ef.free_x_names().items()
    }
    return replace(ef, problem=ef.problem.with_bounds(fixings))
