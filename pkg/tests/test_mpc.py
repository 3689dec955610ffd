"""MPC pipeline tests: condensation, pointwise oracle, explicit law,
Riccati iteration and the maximal output admissible set."""

import numpy as np
import pytest

from maxmpc.errors import InfeasibleStateError, UnstableMatrixError
from maxmpc.geometry import Polytope, bounding_box, contains
from maxmpc.mpc import (
    OcpSpec,
    condense,
    dare,
    dare_residual,
    explicit_mpc,
    feasible_set,
    lqr_gain,
    max_output_admissible_set,
    mpc_point,
    prediction_matrices,
)
from maxmpc.optim import QuadraticProgram, solve_qp


def example_1d_spec(N=2):
    return OcpSpec(
        A=[[1.2]], B=[[1.0]], Q=[[3.8]], R=[[1.0]], P=[[5.0]], N=N,
        X=Polytope.from_box([-10.0], [10.0]),
        U=Polytope.from_box([-1.0], [1.0]),
        T=Polytope.from_box([-1.0], [1.0]),
    )


def example_2d_spec(N=3):
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    B = np.array([[0.5], [1.0]])
    Q = np.eye(2)
    R = np.array([[1.0]])
    P = dare(A, B, Q, R)
    X = Polytope.from_box([-25.0, -5.0], [25.0, 5.0])
    U = Polytope.from_box([-1.0], [1.0])
    K = lqr_gain(A, B, Q, R)
    constraints = Polytope(np.vstack([X.A, -U.A @ K]), np.concatenate([X.b, U.b]))
    T = max_output_admissible_set(A - B @ K, constraints)
    return OcpSpec(A=A, B=B, Q=Q, R=R, P=P, N=N, X=X, U=U, T=T)


@pytest.fixture(scope="module")
def qp1():
    return condense(example_1d_spec())


@pytest.fixture(scope="module")
def law1(qp1):
    return explicit_mpc(qp1)


class TestCondense:
    def test_example1_saturates_at_two(self, qp1):
        assert qp1.n_u == 2
        u = mpc_point(qp1, [2.0])
        assert u[0] == pytest.approx(-1.0, abs=1e-8)

    def test_horizon_one_is_lqr(self):
        spec = example_1d_spec(N=1)
        qp = condense(spec)
        # unconstrained: u* = -(R + B'PB)^{-1} B'PA x
        k = 5.0 * 1.2 / (1.0 + 5.0)
        for x in (0.1, -0.3, 0.5):
            assert mpc_point(qp, [x])[0] == pytest.approx(-k * x, abs=1e-8)

    def test_condensed_matches_sparse_formulation(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            n, m, N = 2, 1, 3
            A = rng.normal(size=(n, n)) * 0.6
            B = rng.normal(size=(n, m))
            spec = OcpSpec(
                A=A, B=B, Q=np.eye(n), R=np.eye(m), P=np.eye(n), N=N,
                X=Polytope.from_box([-5.0] * n, [5.0] * n),
                U=Polytope.from_box([-2.0] * m, [2.0] * m),
                T=Polytope.from_box([-5.0] * n, [5.0] * n),
            )
            qp = condense(spec)
            x0 = rng.uniform(-0.4, 0.4, size=n)
            u_c = mpc_point(qp, x0)
            u_s = sparse_ocp_oracle(spec, x0)
            np.testing.assert_allclose(u_c, u_s, atol=1e-8)


def sparse_ocp_oracle(spec, x0):
    """Solve the OCP with states as explicit variables (equality dynamics)."""
    n, m, N = spec.n, spec.m, spec.N
    nv = N * n + N * m  # x(1..N), u(0..N-1)

    def xs(k):  # slice of x̂(k), k = 1..N
        return slice((k - 1) * n, k * n)

    def us(k):  # slice of û(k), k = 0..N-1
        return slice(N * n + k * m, N * n + (k + 1) * m)

    H = np.zeros((nv, nv))
    f = np.zeros(nv)
    for k in range(1, N):
        H[xs(k), xs(k)] = 2 * spec.Q
    H[xs(N), xs(N)] = 2 * spec.P
    for k in range(N):
        H[us(k), us(k)] = 2 * spec.R
    C = np.zeros((N * n, nv))
    d = np.zeros(N * n)
    for k in range(N):
        C[k * n:(k + 1) * n, xs(k + 1)] = -np.eye(n)
        C[k * n:(k + 1) * n, us(k)] = spec.B
        if k == 0:
            d[k * n:(k + 1) * n] = -spec.A @ x0
        else:
            C[k * n:(k + 1) * n, xs(k)] = spec.A
    rows_A, rows_b = [], []
    for k in range(1, N):
        blk = np.zeros((spec.X.nrows, nv))
        blk[:, xs(k)] = spec.X.A
        rows_A.append(blk)
        rows_b.append(spec.X.b)
    for k in range(N):
        blk = np.zeros((spec.U.nrows, nv))
        blk[:, us(k)] = spec.U.A
        rows_A.append(blk)
        rows_b.append(spec.U.b)
    blk = np.zeros((spec.T.nrows, nv))
    blk[:, xs(N)] = spec.T.A
    rows_A.append(blk)
    rows_b.append(spec.T.b)
    qp = QuadraticProgram(H=H, f=f, A=np.vstack(rows_A), b=np.concatenate(rows_b),
                          C=C, d=d)
    res = solve_qp(qp)
    assert res.optimal
    return res.point[us(0)]


class TestMpcPoint:
    def test_interior(self, qp1):
        assert mpc_point(qp1, [0.5])[0] == pytest.approx(-0.5, abs=1e-8)

    def test_saturated(self, qp1):
        assert mpc_point(qp1, [2.0])[0] == pytest.approx(-1.0, abs=1e-8)

    def test_infeasible_state(self, qp1):
        with pytest.raises(InfeasibleStateError):
            mpc_point(qp1, [3.0])


class TestExplicitMpc:
    def test_example1_regions(self, law1):
        assert law1.n_regions == 3
        # order regions left to right by their centers
        order = np.argsort([bounding_box(R)[0][0] for R in law1.regions])
        bps = []
        for i in order:
            lo, hi = bounding_box(law1.regions[i])
            bps.append((lo[0], hi[0]))
        assert bps[0][0] == pytest.approx(-20.0 / 9.0, abs=1e-9)
        assert bps[0][1] == pytest.approx(-1.0, abs=1e-9)
        assert bps[1][1] == pytest.approx(1.0, abs=1e-9)
        assert bps[2][1] == pytest.approx(20.0 / 9.0, abs=1e-9)
        gains = [float(law1.gains[i][0, 0]) for i in order]
        offsets = [float(law1.offsets[i][0]) for i in order]
        np.testing.assert_allclose(gains, [0.0, -1.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(offsets, [1.0, 0.0, -1.0], atol=1e-9)

    def test_oracle_equivalence(self, qp1, law1):
        rng = np.random.default_rng(2)
        xs = rng.uniform(-20.0 / 9.0, 20.0 / 9.0, size=500)
        worst = 0.0
        for x in xs:
            worst = max(worst, abs(law1([x])[0] - mpc_point(qp1, [x])[0]))
        assert worst <= 1e-6

    def test_saturation(self, law1):
        rng = np.random.default_rng(4)
        for x in rng.uniform(-20.0 / 9.0, 20.0 / 9.0, size=200):
            assert abs(law1([x])[0]) <= 1.0 + 1e-8

    def test_feasible_set(self, law1):
        F = feasible_set(law1)
        lo, hi = bounding_box(F)
        assert lo[0] == pytest.approx(-20.0 / 9.0, abs=1e-9)
        assert hi[0] == pytest.approx(20.0 / 9.0, abs=1e-9)

    def test_continuity_on_shared_facets(self, law1):
        for i in range(law1.n_regions):
            for j in range(i + 1, law1.n_regions):
                inter = law1.regions[i].intersect(law1.regions[j])
                try:
                    lo, hi = bounding_box(inter)
                except Exception:
                    continue
                for x in np.linspace(lo[0], hi[0], 5):
                    vi = law1.gains[i] @ [x] + law1.offsets[i]
                    vj = law1.gains[j] @ [x] + law1.offsets[j]
                    assert abs(vi[0] - vj[0]) <= 1e-7


class TestDare:
    def test_zero_dynamics(self):
        P = dare([[0.0]], [[1.0]], [[3.0]], [[1.0]])
        assert P[0, 0] == pytest.approx(3.0, abs=1e-12)

    def test_example1_value(self):
        P = dare([[1.2]], [[1.0]], [[3.8]], [[1.0]])
        assert P[0, 0] == pytest.approx(5.0, abs=1e-9)
        assert dare_residual(np.array([[1.2]]), np.array([[1.0]]),
                             np.array([[3.8]]), np.array([[1.0]]), P) <= 1e-10

    def test_example2_residual_and_scipy_match(self):
        A = np.array([[1.0, 1.0], [0.0, 1.0]])
        B = np.array([[0.5], [1.0]])
        P = dare(A, B, np.eye(2), [[1.0]])
        assert dare_residual(A, B, np.eye(2), np.array([[1.0]]), P) <= 1e-10
        assert np.min(np.linalg.eigvalsh(P)) > 0
        scipy_linalg = pytest.importorskip("scipy.linalg")
        P_ref = scipy_linalg.solve_discrete_are(A, B, np.eye(2), np.array([[1.0]]))
        np.testing.assert_allclose(P, P_ref, atol=1e-8)


class TestMoas:
    def test_nilpotent_closed_loop(self):
        box = Polytope.from_box([-1.0, -1.0], [1.0, 1.0])
        O = max_output_admissible_set(np.zeros((2, 2)), box)
        lo, hi = bounding_box(O)
        np.testing.assert_allclose(lo, [-1.0, -1.0], atol=1e-9)
        np.testing.assert_allclose(hi, [1.0, 1.0], atol=1e-9)

    def test_scalar_contraction(self):
        O = max_output_admissible_set([[0.5]], Polytope.from_box([-1.0], [1.0]))
        lo, hi = bounding_box(O)
        assert lo[0] == pytest.approx(-1.0, abs=1e-9)
        assert hi[0] == pytest.approx(1.0, abs=1e-9)

    def test_unstable_rejected(self):
        with pytest.raises(UnstableMatrixError):
            max_output_admissible_set([[1.1]], Polytope.from_box([-1.0], [1.0]))

    def test_example2_invariance(self):
        A = np.array([[1.0, 1.0], [0.0, 1.0]])
        B = np.array([[0.5], [1.0]])
        K = lqr_gain(A, B, np.eye(2), [[1.0]])
        A_cl = A - B @ K
        X = Polytope.from_box([-25.0, -5.0], [25.0, 5.0])
        constraints = Polytope(np.vstack([X.A, -K, K]),
                               np.concatenate([X.b, [1.0, 1.0]]))
        O = max_output_admissible_set(A_cl, constraints)
        rng = np.random.default_rng(8)
        lo, hi = bounding_box(O)
        count = 0
        while count < 1000:
            x = rng.uniform(lo, hi)
            if not contains(O, x, tol=1e-9):
                continue
            count += 1
            assert contains(O, A_cl @ x, tol=1e-7)
            assert contains(constraints, x, tol=1e-7)


class TestPrediction:
    def test_matrices(self):
        A = np.array([[1.0, 1.0], [0.0, 1.0]])
        B = np.array([[0.5], [1.0]])
        Gamma, Omega = prediction_matrices(A, B, 2)
        np.testing.assert_allclose(Gamma[:2], A)
        np.testing.assert_allclose(Gamma[2:], A @ A)
        np.testing.assert_allclose(Omega[:2, :1], B)
        np.testing.assert_allclose(Omega[2:, :1], A @ B)
        np.testing.assert_allclose(Omega[2:, 1:], B)
