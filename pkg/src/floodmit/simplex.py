"""Bounded-variable revised simplex over sparse constraint matrices.

Solves   min c.x   s.t.  A x {<=,=,>=} b,   lb <= x <= ub
with infinite bounds allowed.  Every row receives a slack column (bounded by
the row sense) plus an artificial column used only by the cold-start phase 1,
so the working problem is always   min c.x : [A | I | I] x = b.

The basis inverse is never formed: the basis is factorized with a sparse LU
and updated between refactorizations by product-form eta vectors.  Pricing is
a full sparse mat-vec per iteration; the entering rule is a steepest-edge
flavored score d^2 / (1 + ||A_j||^2) with a Bland fallback that engages after
a streak of degenerate pivots.  A dual simplex over the same machinery
supports warm re-solves after bound or right-hand-side changes, which is how
branch-and-bound children and budget-sweep re-solves stay cheap.

All tie-breaks resolve to the smallest column index, so a given input always
follows the identical pivot path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Column statuses in the working problem.
BASIC = 0
AT_LOWER = 1
AT_UPPER = 2
FREE = 3

TOL_DUAL = 1e-9
TOL_PIVOT = 1e-10
TOL_FEAS = 1e-9
REFACTOR_EVERY = 25
DEGENERATE_STREAK = 60

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_NUMERICAL = "numerical-error"


@dataclass
class BasisState:
    """Opaque warm-start token: basis column indices and column statuses."""

    basis: np.ndarray
    status: np.ndarray


@dataclass
class SimplexResult:
    status: str
    objective: float | None
    x: np.ndarray | None          # structural variables only
    row_duals: np.ndarray | None  # d(objective)/d(rhs) per input row
    dual_objective: float | None
    iterations: int
    primal_residual: float
    basis_state: BasisState | None
    infeasibility: float = 0.0


def _failed(status: str, iterations: int, infeasibility: float = 0.0) -> SimplexResult:
    return SimplexResult(
        status=status,
        objective=None,
        x=None,
        row_duals=None,
        dual_objective=None,
        iterations=iterations,
        primal_residual=np.inf,
        basis_state=None,
        infeasibility=infeasibility,
    )


class _Factorization:
    """Sparse LU of the basis plus product-form eta updates."""

    def __init__(self, A_csc: sp.csc_matrix, basis: np.ndarray):
        self.lu = spla.splu(A_csc[:, basis].tocsc())
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        x = self.lu.solve(v)
        for r, g in self.etas:
            # E = I - g e_r^T applied on the left.
            x = x - g * x[r]
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        x = v.copy()
        for r, g in reversed(self.etas):
            x[r] -= g @ x
        return self.lu.solve(x, trans="T")

    def push_eta(self, r: int, w: np.ndarray) -> None:
        g = w.copy()
        g[r] -= 1.0
        g /= w[r]
        self.etas.append((r, g))

    @property
    def age(self) -> int:
        return len(self.etas)


class Workspace:
    """One LP structure, reusable across bound and right-hand-side changes."""

    def __init__(self, c, A, senses, b, lb, ub):
        A = sp.csc_matrix(A)
        self.m, self.n = A.shape
        m = self.m
        eye = sp.identity(m, format="csc")
        self.A_ext = sp.hstack([A, eye, eye], format="csc")
        self.At = self.A_ext.T.tocsr()
        self.c_ext = np.concatenate([np.asarray(c, dtype=float), np.zeros(2 * m)])
        self.senses = list(senses)
        self.b = np.asarray(b, dtype=float).copy()
        norms = np.asarray(self.A_ext.multiply(self.A_ext).sum(axis=0)).ravel()
        self.price_weight = 1.0 + norms
        self.set_bounds(lb, ub)

    def set_bounds(self, lb, ub) -> None:
        m, n = self.m, self.n
        lo = np.empty(n + 2 * m)
        hi = np.empty(n + 2 * m)
        lo[:n] = lb
        hi[:n] = ub
        # Slack bounds encode the row sense: row becomes  a.x + s = b.
        for i, s in enumerate(self.senses):
            if s == "L":
                lo[n + i], hi[n + i] = 0.0, np.inf
            elif s == "G":
                lo[n + i], hi[n + i] = -np.inf, 0.0
            elif s == "E":
                lo[n + i], hi[n + i] = 0.0, 0.0
            else:
                raise ValueError(f"unknown row sense {s!r}")
        # Artificials stay pinned until a cold start opens them.
        lo[n + m :] = 0.0
        hi[n + m :] = 0.0
        self.lo = lo
        self.hi = hi

    def set_rhs(self, b) -> None:
        self.b = np.asarray(b, dtype=float).copy()

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        A = self.A_ext
        start, end = A.indptr[j], A.indptr[j + 1]
        col[A.indices[start:end]] = A.data[start:end]
        return col


class _Solver:
    def __init__(self, ws: Workspace, max_iter: int):
        self.ws = ws
        self.max_iter = max_iter
        self.iterations = 0
        self.basis: np.ndarray | None = None
        self.status_arr: np.ndarray | None = None
        self.x: np.ndarray | None = None
        self.fact: _Factorization | None = None
        self.degen_streak = 0
        self.infeasibility = 0.0

    # -- shared plumbing -------------------------------------------------

    def _nonbasic_value(self, j: int) -> float:
        st = self.status_arr[j]
        if st == AT_LOWER:
            return self.ws.lo[j]
        if st == AT_UPPER:
            return self.ws.hi[j]
        return 0.0

    def _refresh_x(self) -> None:
        """Recompute all values from the factorization; clears drift."""
        ws = self.ws
        x = self.x
        low = self.status_arr == AT_LOWER
        up = self.status_arr == AT_UPPER
        free = self.status_arr == FREE
        x[low] = np.where(np.isfinite(ws.lo[low]), ws.lo[low], 0.0)
        x[up] = np.where(np.isfinite(ws.hi[up]), ws.hi[up], 0.0)
        x[free] = 0.0
        xn = x.copy()
        xn[self.basis] = 0.0
        x[self.basis] = self.fact.ftran(ws.b - ws.A_ext @ xn)

    def _refactorize(self) -> bool:
        try:
            self.fact = _Factorization(self.ws.A_ext, self.basis)
        except (RuntimeError, ValueError):
            return False
        self._refresh_x()
        return True

    def _duals(self, costs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = self.fact.btran(costs[self.basis].astype(float))
        d = costs - self.ws.At @ y
        return y, d

    def _pivot(self, q: int, r: int, w: np.ndarray, step: float, new_val: float, leave_to: int) -> None:
        """Entering q moves by ``step``; basis position r leaves to a bound."""
        ws = self.ws
        leaving = self.basis[r]
        self.x[self.basis] -= step * w
        self.x[leaving] = ws.lo[leaving] if leave_to == AT_LOWER else ws.hi[leaving]
        self.status_arr[leaving] = leave_to
        self.status_arr[q] = BASIC
        self.basis[r] = q
        self.x[q] = new_val
        self.fact.push_eta(r, w)
        if self.fact.age >= REFACTOR_EVERY:
            self._refactorize()

    # -- primal simplex ----------------------------------------------------

    def _entering(self, d: np.ndarray, bland: bool) -> int | None:
        ws = self.ws
        movable = (ws.hi - ws.lo) > TOL_PIVOT
        elig = (
            ((self.status_arr == AT_LOWER) & (d < -TOL_DUAL) & movable)
            | ((self.status_arr == AT_UPPER) & (d > TOL_DUAL) & movable)
            | ((self.status_arr == FREE) & (np.abs(d) > TOL_DUAL))
        )
        if not elig.any():
            return None
        idx = np.flatnonzero(elig)
        if bland:
            return int(idx[0])
        score = d[idx] ** 2 / ws.price_weight[idx]
        return int(idx[int(np.argmax(score))])

    def _ratio_test(self, q: int, sigma: float, w: np.ndarray):
        """Largest step t >= 0 along direction sigma for entering q.

        Returns (t, r, leave_to): r is None for a bound flip of q itself;
        t = inf means the LP is unbounded.  Basic values move as x_B - sigma*t*w.
        """
        ws = self.ws
        lo_b = ws.lo[self.basis]
        hi_b = ws.hi[self.basis]
        xb = self.x[self.basis]
        delta = sigma * w
        if self.status_arr[q] == FREE:
            t_flip = np.inf
        else:
            t_flip = ws.hi[q] - ws.lo[q]

        pos = delta > TOL_PIVOT
        neg = delta < -TOL_PIVOT
        t_lo = np.full(self.ws.m, np.inf)
        t_hi = np.full(self.ws.m, np.inf)
        fin_lo = pos & np.isfinite(lo_b)
        fin_hi = neg & np.isfinite(hi_b)
        t_lo[fin_lo] = np.maximum((xb[fin_lo] - lo_b[fin_lo]) / delta[fin_lo], 0.0)
        t_hi[fin_hi] = np.maximum((xb[fin_hi] - hi_b[fin_hi]) / delta[fin_hi], 0.0)
        t_rows = np.minimum(t_lo, t_hi)

        t_min = t_rows.min() if t_rows.size else np.inf
        if t_min < t_flip:
            ties = np.flatnonzero(t_rows <= t_min + 1e-12)
            r = int(ties[int(np.argmax(np.abs(delta[ties])))])
            leave_to = AT_LOWER if t_lo[r] <= t_hi[r] else AT_UPPER
            return t_min, r, leave_to
        return t_flip, None, None

    def run_primal(self, costs: np.ndarray) -> str:
        """Iterate to optimality for ``costs`` from the current feasible basis."""
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                return STATUS_NUMERICAL
            _, d = self._duals(costs)
            q = self._entering(d, bland)
            if q is None:
                return STATUS_OPTIMAL
            sigma = 1.0 if d[q] < 0 else -1.0
            w = self.fact.ftran(self.ws.column(q))
            t, r, leave_to = self._ratio_test(q, sigma, w)
            self.iterations += 1
            if np.isinf(t):
                return STATUS_UNBOUNDED
            if r is None:
                # Bound flip: q jumps to its other bound, basis unchanged.
                self.x[self.basis] -= (sigma * t) * w
                self.status_arr[q] = AT_UPPER if self.status_arr[q] == AT_LOWER else AT_LOWER
                self.x[q] = self._nonbasic_value(q)
                self.degen_streak = 0
                continue
            new_val = self._nonbasic_value(q) + sigma * t
            self._pivot(q, r, w, sigma * t, new_val, leave_to)
            if t <= TOL_PIVOT:
                self.degen_streak += 1
                if self.degen_streak > DEGENERATE_STREAK:
                    bland = True
            else:
                self.degen_streak = 0
                bland = False

    # -- dual simplex --------------------------------------------------------

    def dual_feasible(self, costs: np.ndarray, slack: float = 1e-7) -> bool:
        _, d = self._duals(costs)
        movable = (self.ws.hi - self.ws.lo) > TOL_PIVOT
        bad = (
            ((self.status_arr == AT_LOWER) & (d < -slack) & movable)
            | ((self.status_arr == AT_UPPER) & (d > slack) & movable)
            | ((self.status_arr == FREE) & (np.abs(d) > slack))
        )
        return not bad.any()

    def run_dual(self, costs: np.ndarray) -> str:
        """Dual simplex from a dual-feasible basis toward primal feasibility."""
        ws = self.ws
        while True:
            if self.iterations >= self.max_iter:
                return STATUS_NUMERICAL
            xb = self.x[self.basis]
            below = ws.lo[self.basis] - xb
            above = xb - ws.hi[self.basis]
            viol = np.maximum(np.maximum(below, above), 0.0)
            r = int(np.argmax(viol))
            if viol[r] <= TOL_FEAS:
                return STATUS_OPTIMAL
            leaving_above = above[r] > below[r]

            rho = np.zeros(ws.m)
            rho[r] = 1.0
            rho = self.fact.btran(rho)
            alpha = ws.At @ rho
            # Leaving variable must travel to its violated bound; the entering
            # step is delta/alpha_q, and sign eligibility keeps it directionally
            # consistent with the entering variable's own bound status.
            s = 1.0 if leaving_above else -1.0
            alpha_s = s * alpha
            movable = (ws.hi - ws.lo) > TOL_PIVOT
            cand = (
                ((self.status_arr == AT_LOWER) & (alpha_s > TOL_PIVOT) & movable)
                | ((self.status_arr == AT_UPPER) & (alpha_s < -TOL_PIVOT) & movable)
                | ((self.status_arr == FREE) & (np.abs(alpha_s) > TOL_PIVOT))
            )
            if not cand.any():
                return STATUS_INFEASIBLE
            _, d = self._duals(costs)
            idx = np.flatnonzero(cand)
            ratios = d[idx] / alpha_s[idx]
            best = ratios.min()
            ties = idx[np.flatnonzero(ratios <= best + 1e-12)]
            q = int(ties[int(np.argmax(np.abs(alpha[ties])))])

            w = self.fact.ftran(ws.column(q))
            bound = ws.hi[self.basis[r]] if leaving_above else ws.lo[self.basis[r]]
            step = (xb[r] - bound) / w[r]
            new_val = self._nonbasic_value(q) + step
            self._pivot(q, r, w, step, new_val, AT_UPPER if leaving_above else AT_LOWER)
            self.iterations += 1

    # -- start procedures ---------------------------------------------------

    def cold_start(self) -> str:
        """Slack/artificial crash basis, then phase-1 infeasibility minimization."""
        ws = self.ws
        m, n = ws.m, ws.n
        total = n + 2 * m
        self.status_arr = np.full(total, AT_LOWER, dtype=np.int8)
        self.x = np.zeros(total)
        for j in range(n):
            lo, hi = ws.lo[j], ws.hi[j]
            if np.isinf(lo) and np.isinf(hi):
                self.status_arr[j] = FREE
                self.x[j] = 0.0
            elif np.isinf(hi) or (np.isfinite(lo) and abs(lo) <= abs(hi)):
                self.status_arr[j] = AT_LOWER
                self.x[j] = lo
            else:
                self.status_arr[j] = AT_UPPER
                self.x[j] = hi

        resid = ws.b - ws.A_ext[:, :n] @ self.x[:n]
        basis = np.empty(m, dtype=np.int64)
        phase1_cost = np.zeros(total)
        ws.lo[n + m :] = 0.0
        ws.hi[n + m :] = 0.0
        needs_phase1 = False
        for i in range(m):
            slack, art = n + i, n + m + i
            if ws.lo[slack] - TOL_FEAS <= resid[i] <= ws.hi[slack] + TOL_FEAS:
                basis[i] = slack
                self.status_arr[slack] = BASIC
                self.x[slack] = resid[i]
            else:
                # Slack parks at the bound nearest the residual; the
                # artificial absorbs the rest and phase 1 drives it to zero.
                sv = min(max(resid[i], ws.lo[slack]), ws.hi[slack])
                self.x[slack] = sv
                self.status_arr[slack] = AT_LOWER if sv == ws.lo[slack] else AT_UPPER
                basis[i] = art
                self.status_arr[art] = BASIC
                z = resid[i] - sv
                self.x[art] = z
                if z > 0:
                    ws.hi[art] = np.inf
                    phase1_cost[art] = 1.0
                else:
                    ws.lo[art] = -np.inf
                    phase1_cost[art] = -1.0
                needs_phase1 = True
        self.basis = basis
        if not self._refactorize():
            return STATUS_NUMERICAL

        if needs_phase1:
            st = self.run_primal(phase1_cost)
            if st == STATUS_NUMERICAL:
                return st
            infeas = float(phase1_cost @ self.x)
            if infeas > 1e-7:
                self.infeasibility = infeas
                return STATUS_INFEASIBLE
            # Pin artificials for phase 2; basic ones idle at value ~zero.
            ws.lo[n + m :] = 0.0
            ws.hi[n + m :] = 0.0
            in_basis = np.zeros(total, dtype=bool)
            in_basis[self.basis] = True
            for j in range(n + m, total):
                if not in_basis[j]:
                    self.status_arr[j] = AT_LOWER
                    self.x[j] = 0.0
        return "feasible"

    def warm_start(self, state: BasisState) -> str | None:
        """Adopt a previous basis; returns a dispatch hint or None if unusable."""
        ws = self.ws
        total = ws.n + 2 * ws.m
        if state.basis.shape != (ws.m,) or state.status.shape != (total,):
            return None
        self.basis = state.basis.copy()
        self.status_arr = state.status.copy()
        self.x = np.zeros(total)
        if not self._refactorize():
            return None
        xb = self.x[self.basis]
        lo_ok = xb >= ws.lo[self.basis] - TOL_FEAS
        hi_ok = xb <= ws.hi[self.basis] + TOL_FEAS
        return "primal" if bool((lo_ok & hi_ok).all()) else "dual"


def solve_linear_program(
    c=None,
    A=None,
    senses=None,
    b=None,
    lb=None,
    ub=None,
    warm: BasisState | None = None,
    max_iter: int | None = None,
    workspace: Workspace | None = None,
) -> SimplexResult:
    """Solve the LP; see the module docstring for conventions.

    Row duals follow the sensitivity convention: the reported dual of row i
    is d(objective)/d(b_i) at the optimum.  The dual objective is the weak
    duality certificate  y.b + sum of reduced costs priced at the bound they
    push against; at a true optimum it matches the primal objective.
    """
    ws = workspace if workspace is not None else Workspace(c, A, senses, b, lb, ub)
    m, n = ws.m, ws.n
    if max_iter is None:
        max_iter = 50 * (m + n) + 2000

    if m == 0:
        return _solve_unconstrained(ws)

    solver = _Solver(ws, max_iter)

    status = None
    if warm is not None:
        # Artificials stay pinned on the warm path.
        ws.lo[n + m :] = 0.0
        ws.hi[n + m :] = 0.0
        started = solver.warm_start(warm)
        if started == "primal":
            status = solver.run_primal(ws.c_ext)
        elif started == "dual" and solver.dual_feasible(ws.c_ext):
            status = solver.run_dual(ws.c_ext)
            if status == STATUS_OPTIMAL:
                # Dual termination is primal feasible; polish any dual noise.
                status = solver.run_primal(ws.c_ext)
        if status not in (STATUS_OPTIMAL, STATUS_UNBOUNDED, STATUS_INFEASIBLE):
            status = None

    if status is None:
        st = solver.cold_start()
        if st == STATUS_NUMERICAL:
            return _failed(STATUS_NUMERICAL, solver.iterations)
        if st == STATUS_INFEASIBLE:
            return _failed(STATUS_INFEASIBLE, solver.iterations, solver.infeasibility)
        status = solver.run_primal(ws.c_ext)

    if status == STATUS_UNBOUNDED:
        return _failed(STATUS_UNBOUNDED, solver.iterations)
    if status == STATUS_INFEASIBLE:
        return _failed(STATUS_INFEASIBLE, solver.iterations)
    if status != STATUS_OPTIMAL:
        return _failed(STATUS_NUMERICAL, solver.iterations)

    # Claimed optimal: refactorize, recompute, and re-verify before reporting.
    for _ in range(5):
        if not solver._refactorize():
            return _failed(STATUS_NUMERICAL, solver.iterations)
        y, d = solver._duals(ws.c_ext)
        movable = (ws.hi - ws.lo) > TOL_PIVOT
        bad = (
            ((solver.status_arr == AT_LOWER) & (d < -1e-7) & movable)
            | ((solver.status_arr == AT_UPPER) & (d > 1e-7) & movable)
            | ((solver.status_arr == FREE) & (np.abs(d) > 1e-7))
        )
        if not bad.any():
            break
        status = solver.run_primal(ws.c_ext)
        if status != STATUS_OPTIMAL:
            return _failed(STATUS_NUMERICAL, solver.iterations)
    else:
        return _failed(STATUS_NUMERICAL, solver.iterations)

    x_full = solver.x
    objective = float(ws.c_ext @ x_full)
    # Residual of the original system: structurals plus slacks against b.
    resid_vec = ws.A_ext[:, : n + m] @ x_full[: n + m] - ws.b
    residual = float(np.abs(resid_vec).max()) if m else 0.0

    dual_obj = float(y @ ws.b)
    pos = d > TOL_DUAL
    neg = d < -TOL_DUAL
    fixed = ~movable
    # Pinned columns (lb == ub) contribute their pinned value whatever the sign.
    lo_mask = (pos & np.isfinite(ws.lo) & ~fixed) | (fixed & (pos | neg))
    hi_mask = neg & np.isfinite(ws.hi) & ~fixed
    dual_obj += float(d[lo_mask] @ ws.lo[lo_mask]) + float(d[hi_mask] @ ws.hi[hi_mask])

    return SimplexResult(
        status=STATUS_OPTIMAL,
        objective=objective,
        x=x_full[:n].copy(),
        row_duals=y.copy(),
        dual_objective=dual_obj,
        iterations=solver.iterations,
        primal_residual=residual,
        basis_state=BasisState(solver.basis.copy(), solver.status_arr.copy()),
    )


def _solve_unconstrained(ws: Workspace) -> SimplexResult:
    n = ws.n
    x = np.zeros(n)
    for j in range(n):
        cj = ws.c_ext[j]
        if cj > 0:
            if np.isinf(ws.lo[j]):
                return _failed(STATUS_UNBOUNDED, 0)
            x[j] = ws.lo[j]
        elif cj < 0:
            if np.isinf(ws.hi[j]):
                return _failed(STATUS_UNBOUNDED, 0)
            x[j] = ws.hi[j]
        else:
            x[j] = ws.lo[j] if np.isfinite(ws.lo[j]) else (ws.hi[j] if np.isfinite(ws.hi[j]) else 0.0)
    obj = float(ws.c_ext[:n] @ x)
    return SimplexResult(STATUS_OPTIMAL, obj, x, np.zeros(0), obj, 0, 0.0, None)
