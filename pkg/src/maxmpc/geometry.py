"""Polytope calculus in halfspace representation.

Every operation reduces to linear programs on the dense simplex kernel;
no vertex enumeration is used anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyPolytopeError
from .optim import LinearProgram, solve_lp

FULL_DIM_RADIUS = 1e-9


@dataclass
class Polytope:
    """H-representation {x : A x ≤ b}."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.size:
            raise ValueError("row count of A must match length of b")
        if not np.all(np.isfinite(self.A)):
            raise ValueError("facet normals must be finite")
        zero_rows = np.all(self.A == 0.0, axis=1)
        if np.any(zero_rows & (self.b < -1e-9)):
            raise ValueError("all-zero row with negative offset (malformed emptiness)")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def nrows(self) -> int:
        return self.A.shape[0]

    @staticmethod
    def from_box(lo, hi) -> "Polytope":
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        n = lo.size
        A = np.vstack([np.eye(n), -np.eye(n)])
        b = np.concatenate([hi, -lo])
        return Polytope(A, b)

    def intersect(self, other: "Polytope") -> "Polytope":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return Polytope(np.vstack([self.A, other.A]), np.concatenate([self.b, other.b]))


def contains(P: Polytope, x, tol: float = 1e-9) -> bool:
    """True iff A x ≤ b + tol componentwise (closure semantics)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != P.dim:
        raise ValueError("dimension mismatch")
    return bool(np.all(P.A @ x <= P.b + tol))


def is_empty(P: Polytope) -> bool:
    """Phase-1 LP feasibility of {x : A x ≤ b}."""
    res = solve_lp(LinearProgram(cost=np.zeros(P.dim), A=P.A, b=P.b))
    return not res.optimal


def chebyshev(P: Polytope) -> tuple[np.ndarray, float]:
    """Center and radius of the largest inscribed ball.

    A radius above ``FULL_DIM_RADIUS`` certifies a nonempty interior.
    Raises :class:`EmptyPolytopeError` on an empty polytope; returns an
    infinite radius when the inscribed ball is unbounded.
    """
    n = P.dim
    norms = np.linalg.norm(P.A, axis=1)
    cap = 1e12
    # variables (c, r): A c + ||A_i|| r <= b, maximize r
    A = np.hstack([P.A, norms[:, None]])
    cost = np.zeros(n + 1)
    cost[n] = -1.0
    lo = np.full(n + 1, -np.inf)
    lo[n] = 0.0
    hi = np.full(n + 1, np.inf)
    hi[n] = cap
    res = solve_lp(LinearProgram(cost=cost, A=A, b=P.b, lo=lo, hi=hi))
    if not res.optimal:
        raise EmptyPolytopeError("chebyshev center of an empty polytope")
    r = float(res.point[n])
    if r >= cap:
        return res.point[:n], np.inf
    return res.point[:n], r


def remove_redundant(P: Polytope) -> Polytope:
    """Drop every row whose removal leaves the set unchanged.

    Each surviving row is irredundant: maximizing it over the remaining
    rows (with itself relaxed by one) exceeds its offset.
    """
    if is_empty(P):
        raise EmptyPolytopeError("redundancy removal requires a nonempty polytope")
    A, b = P.A.copy(), P.b.copy()
    keep = np.ones(A.shape[0], dtype=bool)
    for r in range(A.shape[0]):
        keep[r] = False
        rows = np.nonzero(keep)[0]
        if rows.size == 0:
            keep[r] = True
            continue
        A_test = np.vstack([A[rows], A[r][None, :]])
        b_test = np.concatenate([b[rows], [b[r] + 1.0]])
        res = solve_lp(LinearProgram(cost=-A[r], A=A_test, b=b_test))
        if res.optimal and -res.value <= b[r] + 1e-9 * (1 + abs(b[r])):
            continue  # redundant, stays dropped
        keep[r] = True
    return Polytope(A[keep], b[keep])


def bounding_box(P: Polytope) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise [lo, hi] of the polytope (one LP per bound)."""
    n = P.dim
    lo = np.empty(n)
    hi = np.empty(n)
    for j in range(n):
        c = np.zeros(n)
        c[j] = 1.0
        res = solve_lp(LinearProgram(cost=c, A=P.A, b=P.b))
        if not res.optimal:
            raise EmptyPolytopeError("bounding box of an empty or unbounded polytope")
        lo[j] = res.value
        res = solve_lp(LinearProgram(cost=-c, A=P.A, b=P.b))
        if not res.optimal:
            raise EmptyPolytopeError("bounding box of an empty or unbounded polytope")
        hi[j] = -res.value
    return lo, hi


def sample_rejection(P: Polytope, count: int, rng: np.random.Generator,
                     max_factor: int = 10_000) -> np.ndarray:
    """Uniform samples from P by rejection from its bounding box.

    Raises after ``count * max_factor`` proposals (acceptance starved).
    """
    lo, hi = bounding_box(P)
    out = np.empty((count, P.dim))
    got = 0
    tries = 0
    budget = count * max_factor
    while got < count:
        batch = max(64, count - got)
        pts = rng.uniform(lo, hi, size=(batch, P.dim))
        mask = np.all(pts @ P.A.T <= P.b + 1e-9, axis=1)
        take = pts[mask][: count - got]
        out[got: got + take.shape[0]] = take
        got += take.shape[0]
        tries += batch
        if tries > budget:
            raise EmptyPolytopeError(
                f"rejection sampling accepted {got}/{count} after {tries} proposals")
    return out


def row_valid_for(P: Polytope, a: np.ndarray, beta: float, tol: float = 1e-7) -> bool:
    """True iff a·x ≤ beta holds on all of P (one maximization LP)."""
    res = solve_lp(LinearProgram(cost=-a, A=P.A, b=P.b))
    if not res.optimal:
        return not res.status == "unbounded"
    return -res.value <= beta + tol * (1 + abs(beta))


def envelope(polytopes: list[Polytope]) -> Polytope:
    """Rows (from any member) valid for every member.

    For a convex union this is exactly the union's H-representation.
    """
    if not polytopes:
        raise ValueError("envelope of an empty collection")
    rows_a: list[np.ndarray] = []
    rows_b: list[float] = []
    for P in polytopes:
        for a, beta in zip(P.A, P.b):
            if any(np.allclose(a, a2, atol=1e-12) and abs(beta - b2) < 1e-12
                   for a2, b2 in zip(rows_a, rows_b)):
                continue
            if all(row_valid_for(Q, a, beta) for Q in polytopes):
                rows_a.append(a)
                rows_b.append(float(beta))
    if not rows_a:
        # no common valid rows: envelope is the whole space
        return Polytope(np.zeros((0, polytopes[0].dim)), np.zeros(0))
    return Polytope(np.array(rows_a), np.array(rows_b))


def union_is_convex(P: Polytope, Q: Polytope) -> tuple[bool, Polytope | None]:
    """Envelope test for convexity of P ∪ Q.

    The union is convex iff the envelope E adds nothing outside P ∪ Q;
    each envelope piece cut off by a dropped row of P must lie inside Q
    and vice versa.  Returns (flag, envelope) with the envelope valid as
    the union's H-representation when the flag is true.
    """
    E = envelope([P, Q])
    for (src, other) in ((P, Q), (Q, P)):
        for a, beta in zip(src.A, src.b):
            if row_valid_for(E, a, beta):
                continue  # row survives in E, cuts nothing
            piece = Polytope(np.vstack([E.A, -a[None, :]]), np.concatenate([E.b, [-beta]]))
            if is_empty(piece):
                continue
            # piece = E ∩ {a·x ≥ beta} must be inside `other`
            for a2, b2 in zip(other.A, other.b):
                if not row_valid_for(piece, a2, b2):
                    return False, None
    return True, E
