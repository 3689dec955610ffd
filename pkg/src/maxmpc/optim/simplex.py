"""Dense bounded-variable revised simplex (primal and dual).

The solver works on the computational standard form

    min cᵀz   s.t.  A z = rhs,   lo ≤ z ≤ hi,

with slack columns appended by :func:`solve_lp` for inequality rows and
one artificial column per row for Phase 1.  The basis inverse is kept
explicitly and refreshed periodically; pricing is Dantzig with a Bland
fallback once an iteration budget is hit.  All tie-breaking is by lowest
index so that repeated solves are bitwise reproducible.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericalBreakdownError
from .problems import LinearProgram, SolveResult

FEAS_TOL = 1e-8
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64

AT_LO, AT_UP, FREE, BASIC = 0, 1, 2, 3

OPTIMAL, UNBOUNDED, INFEASIBLE, ITER_LIMIT = "optimal", "unbounded", "infeasible", "iter-limit"


class StandardForm:
    """Equality-form LP with explicit bounds and a maintained basis."""

    def __init__(self, A: np.ndarray, rhs: np.ndarray, cost: np.ndarray,
                 lo: np.ndarray, hi: np.ndarray):
        self.A = np.ascontiguousarray(A, dtype=float)
        self.rhs = np.asarray(rhs, dtype=float)
        self.cost = np.asarray(cost, dtype=float)
        self.lo = np.asarray(lo, dtype=float).copy()
        self.hi = np.asarray(hi, dtype=float).copy()
        self.m, self.n = self.A.shape
        self.basis = np.zeros(self.m, dtype=np.int64)
        self.status = np.zeros(self.n, dtype=np.int8)
        self.binv = np.eye(self.m)
        self._pivots_since_refactor = 0

    # -- basis linear algebra ------------------------------------------------

    def refactor(self) -> None:
        B = self.A[:, self.basis]
        try:
            self.binv = np.linalg.solve(B, np.eye(self.m))
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdownError("singular basis matrix") from exc
        if not np.all(np.isfinite(self.binv)):
            raise NumericalBreakdownError("non-finite basis inverse")
        self._pivots_since_refactor = 0

    def nonbasic_point(self) -> np.ndarray:
        x = np.where(self.status == AT_UP, self.hi, self.lo)
        x[self.status == FREE] = 0.0
        x[self.status == BASIC] = 0.0
        return x

    def point(self) -> np.ndarray:
        x = self.nonbasic_point()
        xb = self.binv @ (self.rhs - self.A @ x)
        x[self.basis] = xb
        return x

    def duals(self) -> np.ndarray:
        return self.cost[self.basis] @ self.binv

    def reduced_costs(self, y: np.ndarray) -> np.ndarray:
        d = self.cost - y @ self.A
        d[self.basis] = 0.0
        return d

    def _pivot(self, row: int, col: int, w: np.ndarray) -> None:
        piv = w[row]
        if abs(piv) < PIVOT_TOL:
            raise NumericalBreakdownError("pivot element below tolerance")
        e = self.binv[row, :] / piv
        self.binv -= np.outer(w, e)
        self.binv[row, :] = e
        self.basis[row] = col
        self.status[col] = BASIC
        self._pivots_since_refactor += 1
        if self._pivots_since_refactor >= REFACTOR_EVERY:
            self.refactor()

    # -- primal simplex ------------------------------------------------------

    def primal(self, max_iter: int | None = None) -> str:
        m, n = self.m, self.n
        if max_iter is None:
            max_iter = 200 * (m + n) + 2000
        bland_after = max_iter // 2
        fixed = self.lo == self.hi
        for it in range(max_iter):
            x = self.point()
            y = self.duals()
            d = self.reduced_costs(y)
            can_up = (self.status == AT_LO) | (self.status == FREE)
            can_dn = (self.status == AT_UP) | (self.status == FREE)
            score = np.where(can_up, -d, 0.0)
            score = np.maximum(score, np.where(can_dn, d, 0.0))
            score[fixed] = 0.0
            score[self.status == BASIC] = 0.0
            eligible = score > DUAL_TOL
            if not np.any(eligible):
                return OPTIMAL
            if it < bland_after:
                e = int(np.argmax(score))
            else:
                e = int(np.nonzero(eligible)[0][0])
            sigma = 1.0 if (can_up[e] and -d[e] > DUAL_TOL) else -1.0
            w = self.binv @ self.A[:, e]
            xb = x[self.basis]
            delta = -sigma * w
            lo_b, hi_b = self.lo[self.basis], self.hi[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_up = np.where(delta > PIVOT_TOL, (hi_b - xb) / delta, np.inf)
                t_dn = np.where(delta < -PIVOT_TOL, (lo_b - xb) / delta, np.inf)
            ratios = np.minimum(t_up, t_dn)
            ratios = np.maximum(ratios, 0.0)
            span = self.hi[e] - self.lo[e]
            t_star = min(float(np.min(ratios, initial=np.inf)), span)
            if not np.isfinite(t_star):
                return UNBOUNDED
            if span <= float(np.min(ratios, initial=np.inf)):
                self.status[e] = AT_UP if self.status[e] == AT_LO else AT_LO
                continue
            blocking = np.nonzero(ratios <= t_star + 1e-12)[0]
            r = int(blocking[np.argmin(self.basis[blocking])])
            leave = self.basis[r]
            hit_upper = delta[r] > 0
            self.status[leave] = AT_UP if hit_upper else AT_LO
            self._pivot(r, e, w)
        return ITER_LIMIT

    # -- dual simplex --------------------------------------------------------

    def dual(self, max_iter: int | None = None) -> str:
        m, n = self.m, self.n
        if max_iter is None:
            max_iter = 200 * (m + n) + 2000
        fixed = self.lo == self.hi
        for _ in range(max_iter):
            x = self.point()
            xb = x[self.basis]
            below = self.lo[self.basis] - xb
            above = xb - self.hi[self.basis]
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= FEAS_TOL:
                return OPTIMAL
            needs_up = below[r] > above[r]
            alpha = self.binv[r, :] @ self.A
            alpha[self.basis] = 0.0
            y = self.duals()
            d = self.reduced_costs(y)
            # Effect of raising x_j from LO (or lowering from UP) on x_B[r] is
            # -alpha_j (+alpha_j); keep only moves that repair the violation.
            if needs_up:
                elig = ((self.status == AT_LO) & (alpha < -PIVOT_TOL)) | \
                       ((self.status == AT_UP) & (alpha > PIVOT_TOL)) | \
                       ((self.status == FREE) & (np.abs(alpha) > PIVOT_TOL))
            else:
                elig = ((self.status == AT_LO) & (alpha > PIVOT_TOL)) | \
                       ((self.status == AT_UP) & (alpha < -PIVOT_TOL)) | \
                       ((self.status == FREE) & (np.abs(alpha) > PIVOT_TOL))
            elig &= ~fixed
            elig[self.status == BASIC] = False
            if not np.any(elig):
                return INFEASIBLE
            idx = np.nonzero(elig)[0]
            theta = np.abs(d[idx]) / np.abs(alpha[idx])
            best = theta.min()
            e = int(idx[np.nonzero(theta <= best + 1e-12)[0][0]])
            w = self.binv @ self.A[:, e]
            leave = self.basis[r]
            self.status[leave] = AT_LO if needs_up else AT_UP
            self._pivot(r, e, w)
        return ITER_LIMIT


def build_standard_form(lp: LinearProgram) -> tuple[StandardForm, int, int]:
    """Append slack columns; returns (form without artificials, n_struct, m_ineq)."""
    n, mi, me = lp.n, lp.A.shape[0], lp.C.shape[0]
    m = mi + me
    A = np.zeros((m, n + mi))
    A[:mi, :n] = lp.A
    A[mi:, :n] = lp.C
    A[:mi, n:] = np.eye(mi)
    rhs = np.concatenate([lp.b, lp.d])
    cost = np.concatenate([lp.cost, np.zeros(mi)])
    lo = np.concatenate([lp.lo, np.zeros(mi)])
    hi = np.concatenate([lp.hi, np.full(mi, np.inf)])
    return StandardForm(A, rhs, cost, lo, hi), n, mi


def add_artificials(form: StandardForm) -> StandardForm:
    """Append one artificial column per row and install the trivial basis."""
    m, n = form.m, form.n
    x0 = np.where(np.isfinite(form.lo), form.lo, 0.0)
    up_only = ~np.isfinite(form.lo) & np.isfinite(form.hi)
    x0[up_only] = form.hi[up_only]
    resid = form.rhs - form.A @ x0
    signs = np.where(resid >= 0, 1.0, -1.0)
    A = np.hstack([form.A, np.diag(signs)])
    cost = np.concatenate([form.cost, np.zeros(m)])
    lo = np.concatenate([form.lo, np.zeros(m)])
    hi = np.concatenate([form.hi, np.full(m, np.inf)])
    full = StandardForm(A, form.rhs, cost, lo, hi)
    full.status[:n] = np.where(np.isfinite(form.lo), AT_LO,
                               np.where(np.isfinite(form.hi), AT_UP, FREE)).astype(np.int8)
    full.basis = np.arange(n, n + m, dtype=np.int64)
    full.status[n:] = BASIC
    full.binv = np.diag(signs)
    return full


def two_phase(form: StandardForm) -> tuple[str, StandardForm]:
    """Run Phase 1 + Phase 2 on ``form``; returns (status, solved form).

    The returned form owns artificial columns pinned to zero; callers index
    only the original columns.
    """
    n_real = form.n
    full = add_artificials(form)
    real_cost = full.cost.copy()
    full.cost = np.zeros(full.n)
    full.cost[n_real:] = 1.0
    status = full.primal()
    if status == ITER_LIMIT:
        raise NumericalBreakdownError("phase-1 simplex hit its iteration limit")
    infeas = full.cost @ full.point()
    if infeas > FEAS_TOL * (1.0 + np.abs(full.rhs).sum()):
        return INFEASIBLE, full
    full.cost = real_cost
    full.lo[n_real:] = 0.0
    full.hi[n_real:] = 0.0
    status = full.primal()
    if status == ITER_LIMIT:
        raise NumericalBreakdownError("phase-2 simplex hit its iteration limit")
    return status, full


def solve_lp(lp: LinearProgram) -> SolveResult:
    """Solve an LP with the bounded-variable primal simplex.

    On ``optimal`` the result carries the primal point, inequality
    multipliers ``duals`` (λ ≥ 0), equality multipliers ``eq_duals`` and
    the tight inequality rows as ``active_set``.
    """
    form, n, mi = build_standard_form(lp)
    status, solved = two_phase(form)
    if status == INFEASIBLE:
        return SolveResult(status="infeasible")
    if status == UNBOUNDED:
        return SolveResult(status="unbounded")
    x = solved.point()[: n + mi]
    xs = x[:n]
    y = solved.duals()
    lam = -y[:mi]
    lam = np.where(np.abs(lam) < 1e-12, 0.0, lam)
    nu = -y[mi:]
    slack = lp.b - lp.A @ xs
    active = tuple(int(i) for i in np.nonzero(slack <= FEAS_TOL * (1 + np.abs(lp.b)))[0])
    return SolveResult(
        status="optimal",
        point=xs,
        value=float(lp.cost @ xs),
        duals=lam,
        eq_duals=nu,
        active_set=active,
    )
