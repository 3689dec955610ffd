"""Problem and result containers for the LP/QP/MILP kernel."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateModelError


def _as_matrix(M, rows: int | None, cols: int, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        M = M.reshape(0, cols)
    if M.shape[1] != cols:
        raise ValueError(f"{name} must have {cols} columns, got shape {M.shape}")
    if rows is not None and M.shape[0] != rows:
        raise ValueError(f"{name} must have {rows} rows, got shape {M.shape}")
    return M


def _as_vector(v, size: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != size:
        raise ValueError(f"{name} must have length {size}, got {v.size}")
    return v


@dataclass
class LinearProgram:
    """min cᵀx  s.t.  A x ≤ b,  C x = d,  lo ≤ x ≤ hi.

    Inequality/equality blocks and bounds may be empty/infinite.  All data
    is validated for consistent dimensions at construction; right-hand
    sides must be finite.
    """

    cost: np.ndarray
    A: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    b: np.ndarray = field(default_factory=lambda: np.zeros(0))
    C: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    d: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.cost = np.asarray(self.cost, dtype=float).reshape(-1)
        n = self.cost.size
        self.A = _as_matrix(self.A, None, n, "A")
        self.b = _as_vector(self.b, self.A.shape[0], "b")
        self.C = _as_matrix(self.C, None, n, "C")
        self.d = _as_vector(self.d, self.C.shape[0], "d")
        self.lo = np.full(n, -np.inf) if self.lo is None else _as_vector(self.lo, n, "lo")
        self.hi = np.full(n, np.inf) if self.hi is None else _as_vector(self.hi, n, "hi")
        if not (np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.d))):
            raise ValueError("right-hand sides b and d must be finite")
        if np.any(self.lo > self.hi):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n(self) -> int:
        return self.cost.size


@dataclass
class QuadraticProgram:
    """min ½xᵀHx + fᵀx  s.t.  A x ≤ b,  C x = d,  with H symmetric PD."""

    H: np.ndarray
    f: np.ndarray
    A: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    b: np.ndarray = field(default_factory=lambda: np.zeros(0))
    C: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    d: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = self.H.shape[0]
        if self.H.shape != (n, n):
            raise ValueError("H must be square")
        if np.max(np.abs(self.H - self.H.T), initial=0.0) > 1e-10:
            raise DegenerateModelError("H is not symmetric to 1e-10")
        try:
            np.linalg.cholesky(self.H)
        except np.linalg.LinAlgError as exc:
            raise DegenerateModelError("H is not positive definite") from exc
        self.f = _as_vector(self.f, n, "f")
        self.A = _as_matrix(self.A, None, n, "A")
        self.b = _as_vector(self.b, self.A.shape[0], "b")
        self.C = _as_matrix(self.C, None, n, "C")
        self.d = _as_vector(self.d, self.C.shape[0], "d")

    @property
    def n(self) -> int:
        return self.H.shape[0]


@dataclass
class MilpProblem:
    """A linear program plus binary integrality marks and an objective sense."""

    base: LinearProgram
    integrality: tuple[int, ...] = ()
    sense: str = "min"

    def __post_init__(self) -> None:
        self.integrality = tuple(int(i) for i in self.integrality)
        n = self.base.n
        if any(i < 0 or i >= n for i in self.integrality):
            raise ValueError("binary index out of range")
        if len(set(self.integrality)) != len(self.integrality):
            raise ValueError("duplicate binary index")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        lo, hi = self.base.lo[list(self.integrality)], self.base.hi[list(self.integrality)]
        if self.integrality and (np.any(lo < -1e-12) or np.any(hi > 1 + 1e-12)):
            raise ValueError("binary variables must have bounds within [0, 1]")


@dataclass
class SolveResult:
    """Outcome of a kernel solve.

    ``status`` is one of ``optimal``, ``infeasible``, ``unbounded`` or
    ``gap-limit``.  ``duals`` holds inequality multipliers (λ ≥ 0) and
    ``eq_duals`` the equality multipliers for LP/QP solves; ``active_set``
    the indices of tight inequality rows.  ``gap`` and ``nodes`` are
    populated by the MILP solver.
    """

    status: str
    point: np.ndarray | None = None
    value: float | None = None
    duals: np.ndarray | None = None
    eq_duals: np.ndarray | None = None
    active_set: tuple[int, ...] | None = None
    gap: float = 0.0
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"
