"""Kernel tests: LP against vertex enumeration, QP against exhaustive
active sets, MILP against binary enumeration."""

import itertools

import numpy as np
import pytest

from maxmpc.optim import (
    LinearProgram,
    MilpProblem,
    QuadraticProgram,
    solve_lp,
    solve_milp,
    solve_qp,
)


def lp_vertex_oracle(c, A, b):
    """Best objective over all basic feasible points of {Ax <= b}."""
    n = A.shape[1]
    best = None
    for rows in itertools.combinations(range(A.shape[0]), n):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, b[list(rows)])
        if np.all(A @ x <= b + 1e-9):
            v = c @ x
            if best is None or v < best:
                best = v
    return best


class TestSolveLp:
    def test_bound_attained_minimum(self):
        res = solve_lp(LinearProgram(cost=[1.0], lo=[0.0]))
        assert res.optimal
        assert res.value == pytest.approx(0.0, abs=1e-12)
        assert res.point[0] == pytest.approx(0.0, abs=1e-12)

    def test_unit_triangle(self):
        lp = LinearProgram(cost=[-1.0, -1.0], A=[[1.0, 1.0]], b=[1.0], lo=[0.0, 0.0])
        res = solve_lp(lp)
        assert res.optimal
        assert res.value == pytest.approx(-1.0, abs=1e-9)

    def test_infeasible(self):
        lp = LinearProgram(cost=[0.0], A=[[1.0], [-1.0]], b=[-1.0, -1.0])
        assert solve_lp(lp).status == "infeasible"

    def test_unbounded(self):
        res = solve_lp(LinearProgram(cost=[-1.0], A=[[-1.0]], b=[0.0]))
        assert res.status == "unbounded"

    def test_equality_constraint(self):
        lp = LinearProgram(cost=[1.0, 2.0], C=[[1.0, 1.0]], d=[3.0], lo=[0.0, 0.0])
        res = solve_lp(lp)
        assert res.optimal
        np.testing.assert_allclose(res.point, [3.0, 0.0], atol=1e-9)

    def test_random_against_vertex_enumeration(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 20:
            n = int(rng.integers(1, 5))
            m = int(rng.integers(n + 1, 11))
            A = rng.normal(size=(m, n))
            x0 = rng.normal(size=n)
            b = A @ x0 + rng.uniform(0.1, 2.0, size=m)  # feasible by construction
            # box rows keep the problem bounded
            A = np.vstack([A, np.eye(n), -np.eye(n)])
            b = np.concatenate([b, np.full(2 * n, 10.0 + np.abs(x0).max())])
            c = rng.normal(size=n)
            oracle = lp_vertex_oracle(c, A, b)
            res = solve_lp(LinearProgram(cost=c, A=A, b=b))
            assert res.optimal
            assert res.value == pytest.approx(oracle, abs=1e-7)
            # primal feasibility residual
            assert np.max(A @ res.point - b) <= 1e-8
            checked += 1

    def test_duality_and_complementary_slackness(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(n + 1, 9))
            A = rng.normal(size=(m, n))
            b = A @ rng.normal(size=n) + rng.uniform(0.1, 1.0, size=m)
            A = np.vstack([A, np.eye(n), -np.eye(n)])
            b = np.concatenate([b, np.full(2 * n, 20.0)])
            c = rng.normal(size=n)
            res = solve_lp(LinearProgram(cost=c, A=A, b=b))
            assert res.optimal
            lam = res.duals
            assert np.all(lam >= -1e-9)
            # stationarity c + A'lam = 0, complementary slackness, zero duality gap
            np.testing.assert_allclose(c + A.T @ lam, 0.0, atol=1e-7)
            slack = b - A @ res.point
            assert np.max(np.abs(lam * slack)) <= 1e-6 * (1 + abs(res.value))
            assert abs(res.value + b @ lam) <= 1e-6 * (1 + abs(res.value))


def qp_active_set_oracle(qp):
    """Exhaustive search over active sets of a strictly convex QP."""
    n, mi = qp.n, qp.A.shape[0]
    best = None
    for k in range(0, n + 1):
        for rows in itertools.combinations(range(mi), k):
            M = np.vstack([qp.C, qp.A[list(rows)]]) if rows or qp.C.shape[0] else np.zeros((0, n))
            r = np.concatenate([qp.d, qp.b[list(rows)]])
            kkt = np.block([[qp.H, M.T], [M, np.zeros((M.shape[0], M.shape[0]))]])
            try:
                sol = np.linalg.solve(kkt, np.concatenate([-qp.f, r]))
            except np.linalg.LinAlgError:
                continue
            x = sol[:n]
            lam = sol[n + qp.C.shape[0]:]
            if np.any(qp.A @ x > qp.b + 1e-9):
                continue
            if np.any(lam < -1e-9):
                continue
            v = 0.5 * x @ qp.H @ x + qp.f @ x
            if best is None or v < best[0] - 1e-12:
                best = (v, x)
    return best


class TestSolveQp:
    def test_projection_onto_halfline(self):
        qp = QuadraticProgram(H=[[2.0]], f=[0.0], A=[[-1.0]], b=[-1.0])
        res = solve_qp(qp)
        assert res.optimal
        assert res.point[0] == pytest.approx(1.0, abs=1e-9)
        assert res.active_set == (0,)

    def test_unconstrained_minimum(self):
        qp = QuadraticProgram(H=2 * np.eye(3), f=np.zeros(3))
        res = solve_qp(qp)
        assert res.optimal
        np.testing.assert_allclose(res.point, 0.0, atol=1e-12)

    def test_infeasible(self):
        qp = QuadraticProgram(H=[[2.0]], f=[0.0], A=[[1.0], [-1.0]], b=[-2.0, 1.0])
        assert solve_qp(qp).status == "infeasible"

    def test_random_against_exhaustive_active_sets(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(1, 7))
            L = rng.normal(size=(n, n))
            H = L @ L.T + n * np.eye(n)
            f = rng.normal(size=n)
            A = rng.normal(size=(m, n))
            b = A @ rng.normal(size=n) + rng.uniform(0.05, 1.5, size=m)
            qp = QuadraticProgram(H=H, f=f, A=A, b=b)
            oracle = qp_active_set_oracle(qp)
            res = solve_qp(qp)
            assert res.optimal
            assert oracle is not None
            np.testing.assert_allclose(res.point, oracle[1], atol=1e-7)

    def test_warm_start_matches_cold(self):
        qp = QuadraticProgram(H=[[2.0, 0.0], [0.0, 2.0]], f=[-2.0, -5.0],
                              A=[[-1.0, 2.0], [1.0, 2.0], [1.0, -2.0], [-1.0, 0.0], [0.0, -1.0]],
                              b=[2.0, 6.0, 2.0, 0.0, 0.0])
        cold = solve_qp(qp)
        assert cold.optimal
        np.testing.assert_allclose(cold.point, [1.4, 1.7], atol=1e-8)
        warm = solve_qp(qp, warm_active=cold.active_set)
        assert warm.optimal
        np.testing.assert_allclose(warm.point, cold.point, atol=1e-9)


class TestSolveMilp:
    def test_single_binary(self):
        lp = LinearProgram(cost=[1.0], lo=[0.0], hi=[1.0])
        p = MilpProblem(base=lp, integrality=(0,), sense="max")
        res = solve_milp(p)
        assert res.optimal
        assert res.value == pytest.approx(1.0, abs=1e-9)

    def test_knapsack_matches_enumeration(self):
        # max 5a+4b+3c s.t. 2a+3b+c <= 4, binaries
        c = np.array([5.0, 4.0, 3.0])
        A = np.array([[2.0, 3.0, 1.0]])
        b = np.array([4.0])
        best = max(
            (c @ np.array(bits) for bits in itertools.product([0, 1], repeat=3)
             if A @ np.array(bits) <= b + 1e-12),
        )
        assert best == 8.0
        lp = LinearProgram(cost=c, A=A, b=b, lo=np.zeros(3), hi=np.ones(3))
        res = solve_milp(MilpProblem(base=lp, integrality=(0, 1, 2), sense="max"))
        assert res.optimal
        assert res.value == pytest.approx(8.0, abs=1e-9)
        np.testing.assert_allclose(res.point, [1.0, 0.0, 1.0], atol=1e-6)

    def test_totally_unimodular_root_is_enough(self):
        # assignment-like LP with integral relaxation
        lp = LinearProgram(
            cost=[-1.0, -2.0, -3.0, -1.5],
            A=[[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0],
               [1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]],
            b=[1.0, 1.0, 1.0, 1.0],
            lo=np.zeros(4), hi=np.ones(4),
        )
        res = solve_milp(MilpProblem(base=lp, integrality=(0, 1, 2, 3), sense="min"))
        assert res.optimal
        assert res.nodes == 1

    def test_infeasible_milp(self):
        lp = LinearProgram(cost=[1.0], A=[[1.0], [-1.0]], b=[0.4, -0.6],
                           lo=[0.0], hi=[1.0])
        res = solve_milp(MilpProblem(base=lp, integrality=(0,)))
        assert res.status == "infeasible"

    def test_random_against_enumeration(self):
        rng = np.random.default_rng(21)
        for _ in range(15):
            nb = int(rng.integers(2, 9))
            m = int(rng.integers(1, 5))
            A = rng.normal(size=(m, nb))
            b = rng.uniform(0.5, 2.0, size=m) + np.maximum(A, 0.0).sum(axis=1) * rng.uniform(0.2, 0.8)
            c = rng.normal(size=nb)
            lp = LinearProgram(cost=c, A=A, b=b, lo=np.zeros(nb), hi=np.ones(nb))
            p = MilpProblem(base=lp, integrality=tuple(range(nb)), sense="max")
            res = solve_milp(p, gap_tol=1e-9)
            best = None
            for bits in itertools.product([0.0, 1.0], repeat=nb):
                xb = np.array(bits)
                if np.all(A @ xb <= b + 1e-9):
                    v = c @ xb
                    if best is None or v > best:
                        best = v
            if best is None:
                assert res.status == "infeasible"
            else:
                assert res.optimal
                assert res.value == pytest.approx(best, abs=1e-7)
                assert res.value >= best - res.gap - 1e-9

    def test_determinism(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(4, 10))
        b = A @ rng.uniform(size=10) + 0.5
        c = rng.normal(size=10)
        lp = LinearProgram(cost=c, A=A, b=b, lo=np.zeros(10), hi=np.ones(10))
        p = MilpProblem(base=lp, integrality=tuple(range(10)), sense="max")
        r1 = solve_milp(p)
        r2 = solve_milp(p)
        assert r1.value == r2.value  # bitwise
        assert np.array_equal(r1.point, r2.point)
        assert r1.nodes == r2.nodes

    def test_warm_start_accepted(self):
        lp = LinearProgram(cost=[5.0, 4.0, 3.0], A=[[2.0, 3.0, 1.0]], b=[4.0],
                           lo=np.zeros(3), hi=np.ones(3))
        p = MilpProblem(base=lp, integrality=(0, 1, 2), sense="max")
        res = solve_milp(p, warm_start=np.array([1.0, 0.0, 1.0]))
        assert res.optimal
        assert res.value == pytest.approx(8.0, abs=1e-9)
