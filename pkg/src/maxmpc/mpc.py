"""Linear MPC: condensation, explicit solution, terminal ingredients.

The optimal control problem

    min  x̂(N)ᵀP x̂(N) + Σ_{κ=0}^{N-1} x̂(κ)ᵀQ x̂(κ) + û(κ)ᵀR û(κ)
    s.t. x̂(κ+1) = A x̂(κ) + B û(κ),  x̂(0) = x,
         (x̂(κ), û(κ)) ∈ X × U  for κ < N,   x̂(N) ∈ T

is condensed into a QP over the stacked input sequence and solved either
pointwise (the ground-truth oracle) or parametrically by enumerating
candidate active sets, which yields the explicit piecewise-affine law.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateModelError,
    InfeasibleStateError,
    NoConvergenceError,
    UnstableMatrixError,
)
from .geometry import (
    FULL_DIM_RADIUS,
    Polytope,
    chebyshev,
    contains,
    envelope,
    is_empty,
    remove_redundant,
    row_valid_for,
    union_is_convex,
)
from .optim import LinearProgram, QuadraticProgram, solve_lp, solve_qp

logger = logging.getLogger(__name__)


@dataclass
class OcpSpec:
    """Data of the finite-horizon optimal control problem."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    N: int
    X: Polytope
    U: Polytope
    T: Polytope

    def __post_init__(self) -> None:
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if self.B.shape[0] != self.A.shape[0] and self.B.shape[1] == self.A.shape[0]:
            self.B = self.B.T
        n, m = self.A.shape[0], self.B.shape[1]
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        if self.A.shape != (n, n) or self.B.shape != (n, m):
            raise ValueError("A must be n×n and B n×m")
        if self.Q.shape != (n, n) or self.P.shape != (n, n) or self.R.shape != (m, m):
            raise ValueError("weight matrix dimensions inconsistent with A, B")
        if self.N < 1:
            raise ValueError("horizon must be >= 1")
        for M, name in ((self.Q, "Q"), (self.P, "P")):
            if np.min(np.linalg.eigvalsh((M + M.T) / 2)) < -1e-9:
                raise DegenerateModelError(f"{name} must be positive semidefinite")
        if np.min(np.linalg.eigvalsh((self.R + self.R.T) / 2)) <= 1e-12:
            raise DegenerateModelError("R must be positive definite")
        if self.X.dim != n or self.T.dim != n or self.U.dim != m:
            raise ValueError("constraint polytope dimensions inconsistent")
        for a, beta in zip(self.X.A, self.X.b):
            if not row_valid_for(self.T, a, beta):
                raise ValueError("terminal set T must be contained in X")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass
class ParametricQp:
    """Condensed problem: min ½uᵀHu + xᵀF u  s.t.  G u ≤ w + S x."""

    H: np.ndarray
    F: np.ndarray
    G: np.ndarray
    w: np.ndarray
    S: np.ndarray
    n: int
    m: int
    N: int

    def __post_init__(self) -> None:
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        self.w = np.asarray(self.w, dtype=float).reshape(-1)
        self.S = np.atleast_2d(np.asarray(self.S, dtype=float))
        nu = self.H.shape[0]
        if nu != self.N * self.m:
            raise ValueError("Hessian size must equal N*m")
        try:
            np.linalg.cholesky((self.H + self.H.T) / 2)
        except np.linalg.LinAlgError as exc:
            raise DegenerateModelError("condensed Hessian is not positive definite") from exc
        if self.G.shape[0] < 1:
            raise ValueError("need at least one parametric constraint row")
        if self.G.shape != (self.w.size, nu) or self.S.shape != (self.w.size, self.n):
            raise ValueError("constraint block dimensions inconsistent")

    @property
    def n_u(self) -> int:
        return self.H.shape[0]


@dataclass
class PwaFunction:
    """Explicit piecewise-affine law: u = K⁽ⁱ⁾x + b⁽ⁱ⁾ on region R⁽ⁱ⁾."""

    regions: list[Polytope]
    gains: list[np.ndarray]
    offsets: list[np.ndarray]
    domain: Polytope
    active_sets: list[tuple[int, ...]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not (len(self.regions) == len(self.gains) == len(self.offsets)):
            raise ValueError("regions, gains and offsets must align")
        self.gains = [np.atleast_2d(np.asarray(K, dtype=float)) for K in self.gains]
        self.offsets = [np.asarray(b, dtype=float).reshape(-1) for b in self.offsets]

    @property
    def n(self) -> int:
        return self.domain.dim

    @property
    def m(self) -> int:
        return self.gains[0].shape[0]

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def region_index(self, x, tol: float = 1e-9) -> int:
        for i, R in enumerate(self.regions):
            if contains(R, x, tol):
                return i
        raise InfeasibleStateError("point lies in no region of the explicit law")

    def __call__(self, x) -> np.ndarray:
        i = self.region_index(x, tol=1e-7)
        return self.gains[i] @ np.asarray(x, dtype=float).reshape(-1) + self.offsets[i]

    def gain_at(self, x) -> np.ndarray:
        return self.gains[self.region_index(x, tol=1e-7)]

    def pieces(self, dim: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Affine pieces (slopes, intercepts) of one output coordinate."""
        betas = np.array([K[dim] for K in self.gains])
        gammas = np.array([b[dim] for b in self.offsets])
        return betas, gammas


def prediction_matrices(A: np.ndarray, B: np.ndarray, N: int):
    """Gamma, Omega with x̂(k) = Gamma_k x + Omega_k u for k = 1..N."""
    n, m = A.shape[0], B.shape[1]
    Gamma = np.zeros((N * n, n))
    Omega = np.zeros((N * n, N * m))
    Ak = np.eye(n)
    powers = [Ak]
    for k in range(1, N + 1):
        Ak = A @ Ak
        powers.append(Ak)
    for k in range(1, N + 1):
        Gamma[(k - 1) * n: k * n] = powers[k]
        for j in range(k):
            Omega[(k - 1) * n: k * n, j * m: (j + 1) * m] = powers[k - 1 - j] @ B
    return Gamma, Omega


def condense(spec: OcpSpec) -> ParametricQp:
    """Eliminate states via the prediction matrices.

    The objective over u = (û(0), …, û(N−1)) is ½uᵀHu + xᵀFu with
    H = 2(ΩᵀQ̄Ω + R̄) and F = 2ΓᵀQ̄Ω; constraints collect û(κ) ∈ U,
    x̂(κ) ∈ X for κ = 0..N−1 (the κ = 0 rows constrain x only) and
    x̂(N) ∈ T.
    """
    n, m, N = spec.n, spec.m, spec.N
    Gamma, Omega = prediction_matrices(spec.A, spec.B, N)
    Qbar = np.zeros((N * n, N * n))
    for k in range(N - 1):
        Qbar[k * n:(k + 1) * n, k * n:(k + 1) * n] = spec.Q
    Qbar[(N - 1) * n:, (N - 1) * n:] = spec.P
    Rbar = np.kron(np.eye(N), spec.R)
    H = 2.0 * (Omega.T @ Qbar @ Omega + Rbar)
    H = (H + H.T) / 2
    F = 2.0 * Gamma.T @ Qbar @ Omega

    G_rows, w_rows, S_rows = [], [], []
    # inputs
    for k in range(N):
        Gu = np.zeros((spec.U.nrows, N * m))
        Gu[:, k * m:(k + 1) * m] = spec.U.A
        G_rows.append(Gu)
        w_rows.append(spec.U.b)
        S_rows.append(np.zeros((spec.U.nrows, n)))
    # state at κ=0 (pure x rows)
    G_rows.append(np.zeros((spec.X.nrows, N * m)))
    w_rows.append(spec.X.b)
    S_rows.append(-spec.X.A)
    # states κ=1..N-1
    for k in range(1, N):
        blk = slice((k - 1) * n, k * n)
        G_rows.append(spec.X.A @ Omega[blk])
        w_rows.append(spec.X.b)
        S_rows.append(-spec.X.A @ Gamma[blk])
    # terminal
    blk = slice((N - 1) * n, N * n)
    G_rows.append(spec.T.A @ Omega[blk])
    w_rows.append(spec.T.b)
    S_rows.append(-spec.T.A @ Gamma[blk])

    return ParametricQp(H=H, F=F, G=np.vstack(G_rows), w=np.concatenate(w_rows),
                        S=np.vstack(S_rows), n=n, m=m, N=N)


def mpc_point(qp: ParametricQp, x) -> np.ndarray:
    """û*(0) at one state — the ground-truth oracle for all sampling checks."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != qp.n:
        raise ValueError("state dimension mismatch")
    prob = QuadraticProgram(H=qp.H, f=qp.F.T @ x, A=qp.G, b=qp.w + qp.S @ x)
    res = solve_qp(prob)
    if not res.optimal:
        raise InfeasibleStateError(f"state {x} is outside the feasible set")
    return res.point[: qp.m]


def _candidate_law(qp: ParametricQp, active: tuple[int, ...]):
    """KKT solve for one candidate active set; returns affine U(x), λ(x)."""
    Hinv_Ft = np.linalg.solve(qp.H, qp.F.T)
    if not active:
        Ku = -Hinv_Ft
        cu = np.zeros(qp.n_u)
        return Ku, cu, np.zeros((0, qp.n)), np.zeros(0)
    Ga = qp.G[list(active)]
    Hinv_Gat = np.linalg.solve(qp.H, Ga.T)
    M = Ga @ Hinv_Gat
    rhs_x = qp.S[list(active)] + Ga @ Hinv_Ft  # multiplies x
    rhs_0 = qp.w[list(active)]
    Lam = -np.linalg.solve(M, rhs_x)
    lam0 = -np.linalg.solve(M, rhs_0)
    Ku = -Hinv_Ft - Hinv_Gat @ Lam
    cu = -Hinv_Gat @ lam0
    return Ku, cu, Lam, lam0


def explicit_mpc(qp: ParametricQp, merge: bool = True) -> PwaFunction:
    """Explicit solution by exhaustive active-set enumeration.

    Candidates are index sets of at most n_u rows with independent
    gradients; each defines an affine law on a critical region cut out by
    primal feasibility and dual nonnegativity.  Lower-dimensional regions
    are dropped, regions sharing an identical affine piece are merged when
    their union is convex, and the domain is the envelope of all regions.
    """
    nz = [i for i in range(qp.G.shape[0]) if np.linalg.norm(qp.G[i]) > 1e-12]
    pieces = []
    for size in range(0, qp.n_u + 1):
        for active in itertools.combinations(nz, size):
            Ga = qp.G[list(active)]
            if size and np.linalg.matrix_rank(Ga, tol=1e-9) < size:
                logger.debug("skipping degenerate active set %s (LICQ violation)", active)
                continue
            Ku, cu, Lam, lam0 = _candidate_law(qp, active)
            # primal feasibility of every row: (G Ku - S) x <= w - G cu
            Ar = qp.G @ Ku - qp.S
            br = qp.w - qp.G @ cu
            # dual feasibility on active rows: -Lam x <= lam0
            if size:
                Ar = np.vstack([Ar, -Lam])
                br = np.concatenate([br, lam0])
            # numerically-zero rows are either trivial or cut the region away
            norms = np.abs(Ar).max(axis=1)
            trivial = norms <= 1e-12
            if np.any(trivial & (br < -1e-9)):
                continue
            region = Polytope(Ar[~trivial], br[~trivial])
            if is_empty(region):
                continue
            _, radius = chebyshev(region)
            if radius <= FULL_DIM_RADIUS:
                continue
            region = remove_redundant(region)
            pieces.append({
                "active": tuple(active),
                "K": Ku[: qp.m].copy(),
                "b": cu[: qp.m].copy(),
                "region": region,
            })
    if not pieces:
        raise InfeasibleStateError("parametric program has no full-dimensional region")
    pieces.sort(key=lambda p: p["active"])
    if merge:
        pieces = _merge_equal_pieces(pieces)
    regions = [p["region"] for p in pieces]
    domain = remove_redundant(envelope(regions))
    return PwaFunction(
        regions=regions,
        gains=[p["K"] for p in pieces],
        offsets=[p["b"] for p in pieces],
        domain=domain,
        active_sets=[p["active"] for p in pieces],
    )


def _merge_equal_pieces(pieces: list[dict]) -> list[dict]:
    """Pairwise-merge regions with the same (K, b) when their union is convex."""
    merged = True
    while merged:
        merged = False
        for i in range(len(pieces)):
            for j in range(i + 1, len(pieces)):
                pi, pj = pieces[i], pieces[j]
                if not (np.allclose(pi["K"], pj["K"], atol=1e-9)
                        and np.allclose(pi["b"], pj["b"], atol=1e-9)):
                    continue
                ok, env = union_is_convex(pi["region"], pj["region"])
                if not ok:
                    continue
                pi["region"] = remove_redundant(env)
                pi["active"] = min(pi["active"], pj["active"])
                del pieces[j]
                merged = True
                break
            if merged:
                break
    return pieces


def feasible_set(pwa: PwaFunction) -> Polytope:
    """The stored domain F_N (envelope of all critical regions)."""
    return pwa.domain


def dare(A, B, Q, R, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Fixed-point iteration for the discrete-time algebraic Riccati equation.

    Iterates P ← Q + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA from P = Q until the
    update is below ``tol``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != A.shape[0]:
        B = B.reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = Q.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        Pn = Q + A.T @ P @ A - A.T @ P @ B @ K
        Pn = (Pn + Pn.T) / 2
        if np.max(np.abs(Pn - P)) <= tol:
            return Pn
        P = Pn
    raise NoConvergenceError("Riccati iteration did not converge; (A,B) may not be stabilizable")


def dare_residual(A, B, Q, R, P) -> float:
    BtP = np.atleast_2d(B).T @ P
    K = np.linalg.solve(np.atleast_2d(R) + BtP @ np.atleast_2d(B), BtP @ A)
    return float(np.max(np.abs(P - (Q + A.T @ P @ A - A.T @ P @ np.atleast_2d(B) @ K))))


def lqr_gain(A, B, Q, R) -> np.ndarray:
    """u = −Kx with K = (R+BᵀPB)⁻¹BᵀPA at the Riccati fixed point."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != A.shape[0]:
        B = B.reshape(A.shape[0], -1)
    P = dare(A, B, Q, R)
    BtP = B.T @ P
    return np.linalg.solve(np.atleast_2d(R) + BtP @ B, BtP @ A)


def _spectral_radius_bound(A: np.ndarray, squarings: int = 6, iters: int = 200) -> float:
    """Upper bound on the spectral radius via ‖A^(2^s)‖₂^(1/2^s).

    The norm of the repeated square is estimated by power iteration on
    MᵀM, which converges to the square of the largest singular value.
    """
    M = A.copy()
    for _ in range(squarings):
        M = M @ M
        scale = np.max(np.abs(M))
        if scale == 0.0:
            return 0.0
        # keep powers in range; rescaling is compensated by the root below
        M = M / scale if scale > 1e100 else M
    v = np.ones(A.shape[0]) / np.sqrt(A.shape[0])
    for _ in range(iters):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    sigma = np.linalg.norm(M @ v)
    return float(sigma ** (1.0 / 2 ** squarings))


def max_output_admissible_set(A_cl, constraints: Polytope, max_t: int = 500) -> Polytope:
    """Gilbert–Tan iteration for the maximal output admissible set.

    Stacks {C A_clᵗ x ≤ d} until every next-step row is redundant; the
    result is the largest constraint-admissible positively invariant set
    of x⁺ = A_cl x.
    """
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    if _spectral_radius_bound(A_cl) >= 1.0:
        raise UnstableMatrixError("closed-loop matrix is not certified Schur stable")
    C, d = constraints.A, constraints.b
    rows_A = [C]
    rows_b = [d]
    Ak = A_cl.copy()
    for _ in range(max_t + 1):
        current = Polytope(np.vstack(rows_A), np.concatenate(rows_b))
        nxt = C @ Ak
        all_redundant = True
        for i in range(nxt.shape[0]):
            if not row_valid_for(current, nxt[i], float(d[i])):
                all_redundant = False
                break
        if all_redundant:
            return remove_redundant(current)
        rows_A.append(nxt)
        rows_b.append(d)
        Ak = A_cl @ Ak
    raise NoConvergenceError("maximal output admissible set did not determine within the cap")
