"""Primal active-set method for strictly convex quadratic programs."""

from __future__ import annotations

import numpy as np

from ..errors import NumericalBreakdownError
from .problems import LinearProgram, QuadraticProgram, SolveResult
from .simplex import solve_lp

_TIGHT_TOL = 1e-8


def _eqp(H, g, M, r):
    """Solve min ½pᵀHp + gᵀp s.t. M p = r; returns (p, multipliers)."""
    n = H.shape[0]
    k = M.shape[0]
    if k == 0:
        return np.linalg.solve(H, -g), np.zeros(0)
    kkt = np.block([[H, M.T], [M, np.zeros((k, k))]])
    rhs = np.concatenate([-g, r])
    sol = np.linalg.solve(kkt, rhs)
    return sol[:n], sol[n:]


def solve_qp(qp: QuadraticProgram, warm_active: tuple[int, ...] | None = None,
             max_iter: int | None = None) -> SolveResult:
    """Solve min ½xᵀHx + fᵀx s.t. A x ≤ b, C x = d.

    Starts from a Phase-1 LP point (or from ``warm_active`` when the
    warm-started equality solve is already feasible) and iterates the
    textbook primal active-set method.  Returns the optimal point, the
    tight inequality rows as ``active_set`` and their multipliers.
    """
    H, f = qp.H, qp.f
    A, b, C, d = qp.A, qp.b, qp.C, qp.d
    n, mi, me = qp.n, A.shape[0], C.shape[0]
    if max_iter is None:
        max_iter = 50 * (n + mi + me) + 100

    def eqp_at(x, work):
        M = np.vstack([C, A[list(work)]]) if work else C
        g = H @ x + f
        try:
            p, lam = _eqp(H, g, M, np.zeros(M.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdownError("singular KKT system in active-set QP") from exc
        return p, lam

    work: list[int] = []
    x = None
    if warm_active is not None:
        work = sorted(set(int(i) for i in warm_active))
        M = np.vstack([C, A[work]]) if work else C
        rhs = np.concatenate([d, b[work]]) if work else d
        try:
            x0, _ = _eqp(H, f, M, rhs)
        except np.linalg.LinAlgError:
            x0 = None
        if x0 is not None and (mi == 0 or np.all(A @ x0 <= b + _TIGHT_TOL * (1 + np.abs(b)))):
            x = x0
        else:
            work = []
    if x is None:
        if mi == 0 and me == 0:
            x = np.linalg.solve(H, -f)
        else:
            feas = solve_lp(LinearProgram(cost=np.zeros(n), A=A, b=b, C=C, d=d))
            if not feas.optimal:
                return SolveResult(status="infeasible")
            x = feas.point

    for _ in range(max_iter):
        p, lam = eqp_at(x, work)
        if np.linalg.norm(p, ord=np.inf) <= 1e-10 * (1.0 + np.linalg.norm(x, ord=np.inf)):
            ineq_lam = lam[me:]
            if ineq_lam.size == 0 or np.all(ineq_lam >= -1e-9):
                mults = np.zeros(mi)
                for j, row in enumerate(work):
                    mults[row] = max(0.0, ineq_lam[j])
                slack = b - A @ x if mi else np.zeros(0)
                active = tuple(int(i) for i in np.nonzero(slack <= _TIGHT_TOL * (1 + np.abs(b)))[0])
                value = float(0.5 * x @ H @ x + f @ x)
                _verify_kkt(qp, x, mults, lam[:me])
                return SolveResult(status="optimal", point=x, value=value,
                                   duals=mults, eq_duals=lam[:me], active_set=active)
            j = int(np.argmin(ineq_lam))
            work.pop(j)
            continue
        if mi:
            ap = A @ p
            res = b - A @ x
            mask = np.ones(mi, dtype=bool)
            mask[work] = False
            mask &= ap > 1e-12
            if np.any(mask):
                idx = np.nonzero(mask)[0]
                alphas = res[idx] / ap[idx]
                amin = float(np.min(alphas))
                alpha = min(1.0, max(0.0, amin))
            else:
                idx = np.zeros(0, dtype=int)
                alpha = 1.0
        else:
            idx = np.zeros(0, dtype=int)
            alpha = 1.0
        x = x + alpha * p
        if alpha < 1.0 - 1e-12 and idx.size:
            hit = idx[np.nonzero(alphas <= alpha + 1e-12)[0]]
            work.append(int(hit[0]))
            work.sort()
    raise NumericalBreakdownError("active-set QP hit its iteration limit")


def _verify_kkt(qp: QuadraticProgram, x, lam, nu) -> None:
    g = qp.H @ x + qp.f
    if qp.A.shape[0]:
        g = g + qp.A.T @ lam
    if qp.C.shape[0]:
        g = g + qp.C.T @ nu
    scale = 1.0 + np.abs(qp.f).max(initial=0.0) + np.abs(x).max(initial=0.0)
    if np.linalg.norm(g, ord=np.inf) > 1e-7 * scale:
        raise NumericalBreakdownError("KKT stationarity residual above tolerance")
