"""Best-first branch-and-bound over binary variables.

Each node stores its branching fixings plus the parent's final basis;
the child LP restarts with the dual simplex, which stays valid because a
fixing only moves variable bounds.  Node order is best bound with FIFO
tie-breaking, branching is most-fractional with lowest-index tie-breaking;
together with the deterministic simplex this makes repeated solves
bitwise identical.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..errors import NumericalBreakdownError
from .problems import LinearProgram, MilpProblem, SolveResult
from .simplex import (
    INFEASIBLE,
    ITER_LIMIT,
    UNBOUNDED,
    StandardForm,
    build_standard_form,
    two_phase,
)

INT_TOL = 1e-6


def _check_point(p: MilpProblem, x: np.ndarray) -> bool:
    lp = p.base
    tol = 1e-7
    if lp.A.shape[0] and np.any(lp.A @ x > lp.b + tol * (1 + np.abs(lp.b))):
        return False
    if lp.C.shape[0] and np.any(np.abs(lp.C @ x - lp.d) > tol * (1 + np.abs(lp.d))):
        return False
    if np.any(x < lp.lo - tol) or np.any(x > lp.hi + tol):
        return False
    if p.integrality:
        idx = list(p.integrality)
        if np.any(np.abs(x[idx] - np.round(x[idx])) > INT_TOL):
            return False
    return True


def solve_milp(p: MilpProblem, gap_tol: float = 0.0, node_limit: int = 1_000_000,
               warm_start: np.ndarray | None = None) -> SolveResult:
    """Solve a binary MILP to within an absolute bound gap.

    ``gap_tol`` is an absolute gap on the objective; the effective
    termination gap is ``max(gap_tol, 1e-9 * (1 + |incumbent|))``.  An
    optional ``warm_start`` point (feasible and integral) seeds the
    incumbent.  On ``optimal`` the reported ``gap`` bounds the distance to
    the true optimum; ``gap-limit`` is returned when the node limit is hit
    and carries the best incumbent plus its remaining gap.
    """
    if gap_tol < 0:
        raise ValueError("gap_tol must be nonnegative")
    sign = 1.0 if p.sense == "min" else -1.0
    lp = p.base
    template, n, _ = build_standard_form(
        LinearProgram(cost=sign * lp.cost, A=lp.A, b=lp.b, C=lp.C, d=lp.d,
                      lo=lp.lo, hi=lp.hi))
    bins = np.array(sorted(p.integrality), dtype=np.int64)

    incumbent_x: np.ndarray | None = None
    incumbent_val = np.inf
    if warm_start is not None:
        ws = np.asarray(warm_start, dtype=float).reshape(-1)
        if ws.size != n or not _check_point(p, ws):
            raise ValueError("warm start point is infeasible for the MILP")
        incumbent_x = ws.copy()
        incumbent_x[bins] = np.round(incumbent_x[bins])
        incumbent_val = float(sign * lp.cost @ incumbent_x)

    status, root = two_phase(template)
    nodes_explored = 1
    if status == INFEASIBLE:
        if incumbent_x is None:
            return SolveResult(status="infeasible", nodes=nodes_explored)
        return SolveResult(status="optimal", point=incumbent_x,
                           value=float(lp.cost @ incumbent_x), gap=0.0,
                           nodes=nodes_explored)
    if status == UNBOUNDED:
        return SolveResult(status="unbounded", nodes=nodes_explored)

    n_node = template.n  # structural + slack columns (before artificials)

    def effective_gap() -> float:
        return max(gap_tol, 1e-9 * (1.0 + abs(incumbent_val)))

    heap: list = []
    tick = 0

    def push(bound: float, fixings: tuple, basis, statuses) -> None:
        nonlocal tick
        heapq.heappush(heap, (bound, tick, fixings, basis, statuses))
        tick += 1

    def consider(form: StandardForm, fixings: tuple, bound: float) -> None:
        """Record an incumbent if integral, otherwise branch."""
        nonlocal incumbent_x, incumbent_val
        x = form.point()[:n]
        if bins.size:
            fr = np.abs(x[bins] - np.round(x[bins]))
        else:
            fr = np.zeros(0)
        if fr.size == 0 or np.all(fr <= INT_TOL):
            val = float(form.cost[:n] @ x)
            if val < incumbent_val - 1e-12:
                incumbent_val = val
                incumbent_x = x.copy()
                incumbent_x[bins] = np.round(incumbent_x[bins])
            return
        col = int(bins[int(np.argmin(np.abs(fr - 0.5)))])
        push(bound, fixings + ((col, 0.0),), form.basis, form.status)
        push(bound, fixings + ((col, 1.0),), form.basis, form.status)

    consider(root, (), float(root.cost @ root.point()))
    final_gap = 0.0

    while heap:
        bound, _, fixings, basis, statuses = heapq.heappop(heap)
        if bound >= incumbent_val - effective_gap():
            final_gap = max(0.0, incumbent_val - bound)
            heap.clear()
            break
        if nodes_explored >= node_limit:
            gap = np.inf if incumbent_x is None else max(0.0, incumbent_val - bound)
            return SolveResult(status="gap-limit", point=incumbent_x,
                               value=None if incumbent_x is None
                               else float(lp.cost @ incumbent_x),
                               gap=gap, nodes=nodes_explored)
        nodes_explored += 1
        lo = root.lo.copy()
        hi = root.hi.copy()
        for colv, val in fixings:
            lo[colv] = val
            hi[colv] = val
        form = StandardForm(root.A, root.rhs, root.cost, lo, hi)
        form.basis = basis.copy()
        form.status = statuses.copy()
        try:
            form.refactor()
            st = form.dual()
        except NumericalBreakdownError:
            st = ITER_LIMIT
        if st == ITER_LIMIT:
            try:
                st, form = two_phase(
                    StandardForm(template.A, template.rhs, template.cost,
                                 lo[:n_node], hi[:n_node]))
            except NumericalBreakdownError:
                continue
        if st == INFEASIBLE:
            continue
        if st == UNBOUNDED:
            return SolveResult(status="unbounded", nodes=nodes_explored)
        node_val = float(form.cost @ form.point())
        if node_val >= incumbent_val - effective_gap():
            continue
        consider(form, fixings, node_val)

    if incumbent_x is None:
        return SolveResult(status="infeasible", nodes=nodes_explored)
    return SolveResult(status="optimal", point=incumbent_x,
                       value=float(lp.cost @ incumbent_x), gap=final_gap,
                       nodes=nodes_explored)
