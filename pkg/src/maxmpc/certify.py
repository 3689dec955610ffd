"""MILP certification of maxout approximations of piecewise-affine laws.

The network output is encoded with indicator big-M rows per channel
(winner selection by binaries δ, one SOS row per neuron), the local gain
with auxiliary products ξ̃/ξ gated by the same binaries, and the explicit
law with one region binary per critical region.  Maximizing the α-norm of
the output difference (or of the gain difference) over the domain yields
the exact maximum error ē_α and the Lipschitz constant L_α of the error
function, each with a branch-and-bound optimality gap.

All big-M constants are tightened per row by interval propagation over
the domain box and capped at the configured bounds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CoverageGapError,
    InfeasibleStateError,
    InvalidBigMError,
    InvalidGainBoundError,
)
from .geometry import Polytope, bounding_box, chebyshev, sample_rejection
from .maxout import MaxoutNetwork, activation_pattern, evaluate
from .mpc import PwaFunction
from .optim import LinearProgram, MilpProblem, solve_milp
from .optim.branch_bound import _check_point

DEFAULT_BIG_M = 1e4
DEFAULT_W_BOUND = 1e4
DEFAULT_EPS = 1e-5


@dataclass(frozen=True)
class CertifySettings:
    """Big-M caps and solver knobs; defaults follow the 1-D study."""

    big_m: float = DEFAULT_BIG_M
    w_bound: float = DEFAULT_W_BOUND
    eps: float = DEFAULT_EPS
    gap_tol: float = 1e-9
    node_limit: int = 500_000
    grid_points: int = 200

    def as_dict(self) -> dict:
        return {"big_m": self.big_m, "w_bound": self.w_bound, "eps": self.eps,
                "gap_tol": self.gap_tol, "node_limit": self.node_limit}


class MilpBuilder:
    """Incremental dense MILP assembly with named column blocks."""

    def __init__(self) -> None:
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.binaries: list[int] = []
        self.rows_ub: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.rows_eq: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.blocks: dict[str, np.ndarray] = {}
        self.sos_rows: list[np.ndarray] = []  # binary columns tied by a Σ=1 row

    @property
    def ncols(self) -> int:
        return len(self.lo)

    def add_vars(self, name: str, count: int, lo, hi, binary: bool = False) -> np.ndarray:
        start = self.ncols
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (count,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (count,))
        self.lo.extend(lo.tolist())
        self.hi.extend(hi.tolist())
        cols = np.arange(start, start + count)
        if binary:
            self.binaries.extend(cols.tolist())
        if name in self.blocks:
            raise ValueError(f"duplicate block name {name!r}")
        self.blocks[name] = cols
        return cols

    def add_ub(self, cols, coefs, rhs: float) -> None:
        self.rows_ub.append((np.asarray(cols, dtype=int),
                             np.asarray(coefs, dtype=float), float(rhs)))

    def add_eq(self, cols, coefs, rhs: float) -> None:
        self.rows_eq.append((np.asarray(cols, dtype=int),
                             np.asarray(coefs, dtype=float), float(rhs)))

    def add_sos1(self, cols) -> None:
        cols = np.asarray(cols, dtype=int)
        self.add_eq(cols, np.ones(cols.size), 1.0)
        self.sos_rows.append(cols)

    def _materialize(self, rows) -> tuple[np.ndarray, np.ndarray]:
        A = np.zeros((len(rows), self.ncols))
        b = np.zeros(len(rows))
        for i, (cols, coefs, rhs) in enumerate(rows):
            A[i, cols] = coefs
            b[i] = rhs
        return A, b

    def build(self, objective: "AffineExpr", sense: str) -> MilpProblem:
        A, b = self._materialize(self.rows_ub)
        C, d = self._materialize(self.rows_eq)
        cost = np.zeros(self.ncols)
        cost[objective.cols] = objective.M[0]
        lp = LinearProgram(cost=cost, A=A, b=b, C=C, d=d,
                           lo=np.array(self.lo), hi=np.array(self.hi))
        return MilpProblem(base=lp, integrality=tuple(self.binaries), sense=sense)


@dataclass
class AffineExpr:
    """value = M @ z[cols] + const over the builder's column space."""

    cols: np.ndarray
    M: np.ndarray
    const: np.ndarray

    def __post_init__(self) -> None:
        self.cols = np.asarray(self.cols, dtype=int)
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        self.const = np.asarray(self.const, dtype=float).reshape(-1)

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    def eval(self, z: np.ndarray) -> np.ndarray:
        return self.M @ z[self.cols] + self.const

    def row(self, j: int) -> "AffineExpr":
        return AffineExpr(self.cols, self.M[j: j + 1], self.const[j: j + 1])

    def __sub__(self, other: "AffineExpr") -> "AffineExpr":
        cols = np.concatenate([self.cols, other.cols])
        M = np.hstack([self.M, -other.M])
        return AffineExpr(cols, M, self.const - other.const)


def identity_expr(cols: np.ndarray) -> AffineExpr:
    return AffineExpr(cols, np.eye(len(cols)), np.zeros(len(cols)))


@dataclass
class MiEncoding:
    """Variable blocks, constraint bookkeeping and output expressions."""

    builder: MilpBuilder
    x_cols: np.ndarray
    blocks: dict[str, np.ndarray] = field(default_factory=dict)
    output: AffineExpr | None = None       # Φ(x) or law value u(x)
    gain: AffineExpr | None = None         # flattened (m·n) local gain
    delta_cols: list[np.ndarray] = field(default_factory=list)
    q_cols: list[np.ndarray] = field(default_factory=list)
    q_bounds: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    rho_cols: np.ndarray | None = None
    gain_bounds: tuple[np.ndarray, np.ndarray] | None = None
    output_bounds: tuple[np.ndarray, np.ndarray] | None = None


def _interval_affine(W: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Range of W y + b over the box [lo, hi]."""
    prod_lo = np.minimum(W * lo, W * hi).sum(axis=1) + b
    prod_hi = np.maximum(W * lo, W * hi).sum(axis=1) + b
    return prod_lo, prod_hi


def network_intervals(net: MaxoutNetwork, lo_x: np.ndarray, hi_x: np.ndarray):
    """Per-layer channel and neuron ranges by interval propagation."""
    out = []
    lo, hi = lo_x, hi_x
    for layer in net.layers:
        z_lo, z_hi = _interval_affine(layer.weights, layer.biases, lo, hi)
        q_lo = z_lo.reshape(layer.neurons, layer.channels).max(axis=1)
        q_hi = z_hi.reshape(layer.neurons, layer.channels).max(axis=1)
        out.append((z_lo, z_hi, q_lo, q_hi))
        lo, hi = q_lo, q_hi
    return out


def _interval_matmul(W: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Entry ranges of W @ X for X within [lo, hi] elementwise."""
    Wp = np.maximum(W, 0.0)
    Wm = np.minimum(W, 0.0)
    return Wp @ lo + Wm @ hi, Wp @ hi + Wm @ lo


def gain_intervals(net: MaxoutNetwork):
    """Per-layer ranges of the partial products W̃ = W ξ_prev and ξ."""
    n = net.input_dim
    xi_lo, xi_hi = np.eye(n), np.eye(n)
    out = []
    for layer in net.layers:
        wt_lo, wt_hi = _interval_matmul(layer.weights, xi_lo, xi_hi)
        # the winning channel's row is copied into ξ: hull over channels
        xi_lo = wt_lo.reshape(layer.neurons, layer.channels, n).min(axis=1)
        xi_hi = wt_hi.reshape(layer.neurons, layer.channels, n).max(axis=1)
        out.append((wt_lo, wt_hi, xi_lo, xi_hi))
    return out


def _preflight_output(net: MaxoutNetwork, big_m: float, lo: np.ndarray, hi: np.ndarray):
    rng = np.random.default_rng(0)
    X = rng.uniform(lo, hi, size=(1000, lo.size))
    for x in X:
        y = x
        for layer in net.layers:
            z = layer.preactivations(y)
            if np.max(np.abs(z)) > big_m:
                raise InvalidBigMError(
                    f"sampled preactivation {np.max(np.abs(z)):.3e} exceeds big-M {big_m:.3e}")
            y = z.reshape(layer.neurons, layer.channels).max(axis=1)


def _preflight_gain(net: MaxoutNetwork, w_bound: float, lo: np.ndarray, hi: np.ndarray):
    rng = np.random.default_rng(1)
    X = rng.uniform(lo, hi, size=(200, lo.size))
    for x in X:
        pat = activation_pattern(net, x)
        xi = np.eye(net.input_dim)
        for layer, D in zip(net.layers, pat.delta_matrices(net)):
            wt = layer.weights @ xi
            if np.max(np.abs(wt)) > w_bound:
                raise InvalidGainBoundError(
                    f"sampled partial gain {np.max(np.abs(wt)):.3e} exceeds bound {w_bound:.3e}")
            xi = D @ wt


def encode_network_output(net: MaxoutNetwork, big_m: float = DEFAULT_BIG_M,
                          eps: float = 0.0, box=None,
                          builder: MilpBuilder | None = None,
                          x_cols: np.ndarray | None = None,
                          prefix: str = "net") -> MiEncoding:
    """Indicator constraints recovering Φ(x) (exact for eps = 0).

    Per channel j of neuron s:  q_s ≤ ch_j + M_j(1−δ_j)  and
    q_s ≥ ch_j + ε(1−δ_j),  with Σ_j δ_j = 1 per neuron.  ``box`` bounds
    the encoded states; it defaults to ±big_m, and when given it is also
    used for the sampled big-M validity pre-flight.
    """
    if builder is None:
        builder = MilpBuilder()
    n = net.input_dim
    if box is None:
        lo_x = np.full(n, -big_m)
        hi_x = np.full(n, big_m)
    else:
        lo_x = np.asarray(box[0], dtype=float).reshape(-1)
        hi_x = np.asarray(box[1], dtype=float).reshape(-1)
        _preflight_output(net, big_m, lo_x, hi_x)
    if x_cols is None:
        x_cols = builder.add_vars(f"{prefix}.x", n, lo_x, hi_x)
    enc = MiEncoding(builder=builder, x_cols=x_cols)
    intervals = network_intervals(net, lo_x, hi_x)

    prev_cols = x_cols
    for i, layer in enumerate(net.layers):
        z_lo, z_hi, q_lo, q_hi = intervals[i]
        q = builder.add_vars(f"{prefix}.q{i}", layer.neurons, q_lo, q_hi)
        delta = builder.add_vars(f"{prefix}.delta{i}", layer.channels * layer.neurons,
                                 0.0, 1.0, binary=True)
        enc.q_cols.append(q)
        enc.delta_cols.append(delta)
        enc.q_bounds.append((q_lo, q_hi))
        for s in range(layer.neurons):
            chans = np.arange(s * layer.channels, (s + 1) * layer.channels)
            builder.add_sos1(delta[chans])
            for h in chans:
                W_row = layer.weights[h]
                b_row = layer.biases[h]
                M = min(big_m, max(0.0, q_hi[s] - z_lo[h]))
                # q_s - W q_prev + M δ <= b + M
                cols = np.concatenate([[q[s]], prev_cols, [delta[h]]])
                coefs = np.concatenate([[1.0], -W_row, [M]])
                builder.add_ub(cols, coefs, b_row + M)
                # -q_s + W q_prev - ε δ <= -b - ε
                coefs2 = np.concatenate([[-1.0], W_row, [-eps]])
                builder.add_ub(cols, coefs2, -b_row - eps)
        prev_cols = q
    enc.output = AffineExpr(prev_cols, net.output_weights, net.output_biases)
    z_lo, z_hi, q_lo, q_hi = intervals[-1]
    out_lo, out_hi = _interval_affine(net.output_weights, net.output_biases, q_lo, q_hi)
    enc.output_bounds = (out_lo, out_hi)
    enc.blocks = dict(builder.blocks)
    return enc


def encode_network_gain(net: MaxoutNetwork, w_bound: float,
                        enc: MiEncoding, box=None,
                        prefix: str = "net") -> MiEncoding:
    """Gain product rows gated by the output encoding's binaries.

    Adds ξ̃ (channel-masked rows of W̃ = W ξ_prev), the per-neuron channel
    sums ξ, and — for deeper layers — the product variables W̃ themselves.
    The conjunction with the ε > 0 output constraints makes the recovered
    K_NN = W_out ξ^(ℓ) equal the local gain away from activation
    boundaries (and infeasible within the ε margin).
    """
    builder = enc.builder
    n = net.input_dim
    if box is not None:
        lo_x = np.asarray(box[0], dtype=float).reshape(-1)
        hi_x = np.asarray(box[1], dtype=float).reshape(-1)
        _preflight_gain(net, w_bound, lo_x, hi_x)
    gi = gain_intervals(net)

    xi_prev_cols = None  # layer-1 products are the constant weight rows
    for i, layer in enumerate(net.layers):
        wt_lo, wt_hi = gi[i][0], gi[i][1]
        xi_lo, xi_hi = gi[i][2], gi[i][3]
        pw = layer.channels * layer.neurons
        delta = enc.delta_cols[i]
        ub = np.minimum(np.maximum(0.0, wt_hi), w_bound)
        lb = np.maximum(np.minimum(0.0, wt_lo), -w_bound)
        xt = builder.add_vars(f"{prefix}.xi_t{i}", pw * n, lb.ravel(), ub.ravel())
        xt = xt.reshape(pw, n)
        if i > 0:
            wt = builder.add_vars(f"{prefix}.wt{i}", pw * n,
                                  np.maximum(wt_lo, -w_bound).ravel(),
                                  np.minimum(wt_hi, w_bound).ravel()).reshape(pw, n)
            # W̃ = W ξ_prev (equality rows per entry)
            for h in range(pw):
                for r in range(n):
                    cols = np.concatenate([[wt[h, r]], xi_prev_cols[:, r]])
                    coefs = np.concatenate([[-1.0], layer.weights[h]])
                    builder.add_eq(cols, coefs, 0.0)
        for h in range(pw):
            for r in range(n):
                # lb δ ≤ ξ̃ ≤ ub δ
                builder.add_ub([xt[h, r], delta[h]], [1.0, -ub[h, r]], 0.0)
                builder.add_ub([xt[h, r], delta[h]], [-1.0, lb[h, r]], 0.0)
                if i == 0:
                    c = layer.weights[h, r]
                    # constant W̃ = c:  ξ̃ − c ≤ −lb(1−δ)  and  c − ξ̃ ≤ ub(1−δ)
                    builder.add_ub([xt[h, r], delta[h]], [1.0, -lb[h, r]], c - lb[h, r])
                    builder.add_ub([xt[h, r], delta[h]], [-1.0, ub[h, r]], ub[h, r] - c)
                else:
                    # −ub(1−δ) ≤ ξ̃ − W̃ ≤ −lb(1−δ)
                    builder.add_ub([xt[h, r], wt[h, r], delta[h]],
                                   [1.0, -1.0, -lb[h, r]], -lb[h, r])
                    builder.add_ub([xt[h, r], wt[h, r], delta[h]],
                                   [-1.0, 1.0, ub[h, r]], ub[h, r])
        xi = builder.add_vars(f"{prefix}.xi{i}", layer.neurons * n,
                              xi_lo.ravel(), xi_hi.ravel()).reshape(layer.neurons, n)
        for s in range(layer.neurons):
            for r in range(n):
                chans = np.arange(s * layer.channels, (s + 1) * layer.channels)
                cols = np.concatenate([[xi[s, r]], xt[chans, r]])
                coefs = np.concatenate([[-1.0], np.ones(layer.channels)])
                builder.add_eq(cols, coefs, 0.0)
        xi_prev_cols = xi

    m = net.output_dim
    W_out = net.output_weights
    M = np.zeros((m * n, xi_prev_cols.size))
    for j in range(m):
        for r in range(n):
            for s in range(net.layers[-1].neurons):
                M[j * n + r, s * n + r] = W_out[j, s]
    enc.gain = AffineExpr(xi_prev_cols.ravel(), M, np.zeros(m * n))
    k_lo, k_hi = _interval_matmul(W_out, gi[-1][2], gi[-1][3])
    enc.gain_bounds = (k_lo.ravel(), k_hi.ravel())
    enc.blocks = dict(builder.blocks)
    return enc


def encode_pwa_law(pwa: PwaFunction, domain: Polytope, big_m: float = DEFAULT_BIG_M,
                   builder: MilpBuilder | None = None,
                   x_cols: np.ndarray | None = None,
                   with_value: bool = True, with_gain: bool = False,
                   prefix: str = "pwa") -> MiEncoding:
    """Region selection by binaries ρ (Σρ = 1) with big-M membership rows.

    The law value is recovered as u = Σ_i v_i with v_i the big-M-linearized
    product ρ_i·(K_i x + b_i); the local gain as K = Σ_i ρ_i K_i, which is
    linear because the per-region gains are constants.
    """
    if builder is None:
        builder = MilpBuilder()
    n, m = pwa.n, pwa.m
    lo_x, hi_x = bounding_box(domain)
    if x_cols is None:
        x_cols = builder.add_vars(f"{prefix}.x", n, lo_x, hi_x)
        for a, beta in zip(domain.A, domain.b):
            builder.add_ub(x_cols, a, beta)
    enc = MiEncoding(builder=builder, x_cols=x_cols)

    rng = np.random.default_rng(2)
    for x in sample_rejection(domain, 1000, rng):
        if not any(np.all(R.A @ x <= R.b + 1e-7) for R in pwa.regions):
            raise CoverageGapError(f"domain sample {x} lies in no region")

    r = pwa.n_regions
    rho = builder.add_vars(f"{prefix}.rho", r, 0.0, 1.0, binary=True)
    builder.add_sos1(rho)
    enc.rho_cols = rho
    for i, R in enumerate(pwa.regions):
        slack_hi, _ = None, None
        row_lo, row_hi = _interval_affine(R.A, -R.b, lo_x, hi_x)
        for k in range(R.nrows):
            M = min(big_m, max(0.0, row_hi[k]))
            cols = np.concatenate([x_cols, [rho[i]]])
            coefs = np.concatenate([R.A[k], [M]])
            builder.add_ub(cols, coefs, R.b[k] + M)

    if with_value:
        v_all = []
        val_lo = np.empty((r, m))
        val_hi = np.empty((r, m))
        for i in range(r):
            val_lo[i], val_hi[i] = _interval_affine(pwa.gains[i], pwa.offsets[i], lo_x, hi_x)
        v = builder.add_vars(f"{prefix}.v", r * m,
                             np.minimum(val_lo, 0.0).ravel(),
                             np.maximum(val_hi, 0.0).ravel()).reshape(r, m)
        for i in range(r):
            for j in range(m):
                K_row = pwa.gains[i][j]
                c_row = pwa.offsets[i][j]
                L, U = val_lo[i, j], val_hi[i, j]
                builder.add_ub([v[i, j], rho[i]], [1.0, -U], 0.0)
                builder.add_ub([v[i, j], rho[i]], [-1.0, L], 0.0)
                # v − (Kx+b) ≤ −L(1−ρ)   and   v − (Kx+b) ≥ −U(1−ρ)
                cols = np.concatenate([[v[i, j]], x_cols, [rho[i]]])
                builder.add_ub(cols, np.concatenate([[1.0], -K_row, [-L]]), c_row - L)
                builder.add_ub(cols, np.concatenate([[-1.0], K_row, [U]]), -c_row + U)
        sum_M = np.zeros((m, r * m))
        for j in range(m):
            sum_M[j, j::m] = 1.0
        enc.output = AffineExpr(v.ravel(), sum_M, np.zeros(m))
        enc.output_bounds = (val_lo.min(axis=0), val_hi.max(axis=0))

    if with_gain:
        K_stack = np.stack([K for K in pwa.gains])  # (r, m, n)
        k_lo = K_stack.min(axis=0).ravel()
        k_hi = K_stack.max(axis=0).ravel()
        kap = builder.add_vars(f"{prefix}.K", m * n, k_lo, k_hi)
        for j in range(m):
            for c in range(n):
                cols = np.concatenate([[kap[j * n + c]], rho])
                coefs = np.concatenate([[-1.0], K_stack[:, j, c]])
                builder.add_eq(cols, coefs, 0.0)
        enc.gain = identity_expr(kap)
        enc.gain_bounds = (k_lo, k_hi)
    enc.blocks = dict(builder.blocks)
    return enc


@dataclass
class Certificate:
    """Solved certification MILP: exact value, witness and bound gap."""

    kind: str
    alpha: float
    value: float
    witness: np.ndarray
    gap: float
    status: str
    settings: dict
    wall_time: float = 0.0
    nodes: int = 0

    def __post_init__(self) -> None:
        self.witness = np.asarray(self.witness, dtype=float).reshape(-1)


def _abs_encoding(builder: MilpBuilder, expr: AffineExpr, lo: float, hi: float,
                  name: str) -> tuple[np.ndarray, np.ndarray]:
    """Columns (a, sign) with a = |expr| (scalar), exact both ways."""
    bound = max(abs(lo), abs(hi), 0.0)
    a = builder.add_vars(name, 1, 0.0, bound)
    s = builder.add_vars(name + ".sign", 1, 0.0, 1.0, binary=True)
    # a ≤ expr + M(1−s)  with M = bound − lo ≥ a − expr
    M_pos = bound - lo
    cols = np.concatenate([a, expr.cols, s])
    builder.add_ub(cols, np.concatenate([[1.0], -expr.M[0], [M_pos]]),
                   expr.const[0] + M_pos)
    # a ≤ −expr + M s
    M_neg = bound + hi
    builder.add_ub(cols, np.concatenate([[1.0], expr.M[0], [-M_neg]]),
                   -expr.const[0])
    # a ≥ expr and a ≥ −expr keep the abs exact even off the argmax
    builder.add_ub(cols, np.concatenate([[-1.0], expr.M[0], [0.0]]), -expr.const[0])
    builder.add_ub(cols, np.concatenate([[-1.0], -expr.M[0], [0.0]]), expr.const[0])
    return a, s


@dataclass
class NormEncoding:
    """Objective epigraph plus the bookkeeping needed to lift witnesses."""

    objective: AffineExpr
    abs_cols: np.ndarray
    sign_cols: np.ndarray
    sel_cols: np.ndarray | None
    t_col: int | None
    groups: list[np.ndarray]  # abs-column index groups per selector choice
    group_of: list[np.ndarray]  # err-coordinate indices per group

    def lift(self, z: np.ndarray, err: np.ndarray) -> None:
        """Fill abs/sign/selector/epigraph entries for a concrete error."""
        z[self.abs_cols] = np.abs(err)
        z[self.sign_cols] = (err >= 0).astype(float)
        if self.sel_cols is not None:
            sums = np.array([np.abs(err[idx]).sum() for idx in self.group_of])
            g = int(np.argmax(sums))
            sel = np.zeros(self.sel_cols.size)
            sel[g] = 1.0
            z[self.sel_cols] = sel
            z[self.t_col] = sums[g]


def _norm_objective(builder: MilpBuilder, err: AffineExpr,
                    err_lo: np.ndarray, err_hi: np.ndarray,
                    alpha: float, row_major_shape: tuple[int, int],
                    induced: bool) -> NormEncoding:
    """Epigraph-from-below of the α-norm of ``err`` for maximization.

    Vector case (``induced`` false): ‖e‖_∞ via a selector over exact
    absolute values, ‖e‖₁ as their plain sum.  Matrix case (row-major
    ``err``): maximum absolute row sum for α = ∞, column sum for α = 1,
    with one selector binary per row/column.
    """
    m, n = row_major_shape
    abs_cols, sign_cols = [], []
    for k in range(err.dim):
        a, sgn = _abs_encoding(builder, err.row(k), float(err_lo[k]),
                               float(err_hi[k]), f"abs{k}.{len(builder.blocks)}")
        abs_cols.append(int(a[0]))
        sign_cols.append(int(sgn[0]))
    abs_cols = np.array(abs_cols)
    sign_cols = np.array(sign_cols)
    abs_hi = np.maximum(np.abs(err_lo), np.abs(err_hi))

    if not induced and alpha == 1 and err.dim > 1:
        obj = AffineExpr(abs_cols, np.ones((1, err.dim)), np.zeros(1))
        return NormEncoding(objective=obj, abs_cols=abs_cols, sign_cols=sign_cols,
                            sel_cols=None, t_col=None, groups=[], group_of=[])

    if not induced:
        idx_groups = [np.array([k]) for k in range(err.dim)]
    elif alpha == np.inf:
        idx_groups = [np.arange(j * n, (j + 1) * n) for j in range(m)]
    else:
        idx_groups = [np.arange(c, m * n, n) for c in range(n)]
    groups = [abs_cols[idx] for idx in idx_groups]
    group_hi = [float(abs_hi[idx].sum()) for idx in idx_groups]

    t_hi = max(group_hi) if group_hi else 0.0
    t = builder.add_vars(f"norm.t.{len(builder.blocks)}", 1, 0.0, t_hi)
    sel = builder.add_vars(f"norm.sel.{len(builder.blocks)}", len(groups),
                           0.0, 1.0, binary=True)
    builder.add_sos1(sel)
    for g, cols in enumerate(groups):
        # t ≤ Σ_group abs + t_hi(1 − sel_g)
        row_cols = np.concatenate([t, cols, [sel[g]]])
        coefs = np.concatenate([[1.0], -np.ones(cols.size), [t_hi]])
        builder.add_ub(row_cols, coefs, t_hi)
    return NormEncoding(objective=identity_expr(t), abs_cols=abs_cols,
                        sign_cols=sign_cols, sel_cols=sel, t_col=int(t[0]),
                        groups=groups, group_of=idx_groups)


def _candidate_states(pwa: PwaFunction, domain: Polytope, count: int) -> np.ndarray:
    """Deterministic incumbent grid: domain center, region centers, samples."""
    pts = [chebyshev(domain)[0]]
    for R in pwa.regions:
        inter = Polytope(np.vstack([R.A, domain.A]), np.concatenate([R.b, domain.b]))
        try:
            c, rad = chebyshev(inter)
        except Exception:
            continue
        if rad > 1e-9:
            pts.append(c)
    rng = np.random.default_rng(3)
    pts.extend(sample_rejection(domain, count, rng))
    return np.array(pts)


def _check_alpha(alpha: float) -> None:
    if alpha not in (1, 1.0, np.inf):
        raise ValueError("alpha must be 1 or inf")


def _lift_network(z: np.ndarray, net: MaxoutNetwork, x: np.ndarray,
                  enc: MiEncoding, with_gain: bool, builder: MilpBuilder) -> np.ndarray:
    """Write the forward-pass variables (and gain products) into z; returns K_NN."""
    y = np.asarray(x, dtype=float)
    pat = activation_pattern(net, y)
    xi = np.eye(net.input_dim)
    for i, layer in enumerate(net.layers):
        zz = layer.preactivations(y).reshape(layer.neurons, layer.channels)
        win = np.array(pat.winners[i])
        y = zz[np.arange(layer.neurons), win]
        z[enc.q_cols[i]] = y
        d = np.zeros(layer.neurons * layer.channels)
        rows = np.arange(layer.neurons) * layer.channels + win
        d[rows] = 1.0
        z[enc.delta_cols[i]] = d
        if with_gain:
            wt = layer.weights @ xi
            if i > 0:
                z[builder.blocks[f"net.wt{i}"]] = wt.ravel()
            z[builder.blocks[f"net.xi_t{i}"]] = (wt * d[:, None]).ravel()
            xi = wt[rows]
            z[builder.blocks[f"net.xi{i}"]] = xi.ravel()
    return net.output_weights @ xi if with_gain else None


def max_error(pwa: PwaFunction, net: MaxoutNetwork, domain: Polytope,
              alpha: float = np.inf,
              settings: CertifySettings = CertifySettings()) -> Certificate:
    """Exact ē_α = max_{x∈domain} ‖π(x) − Φ(x)‖_α by MILP.

    The law and network encodings share the state variables; the output
    encoding uses ε = 0 so the recovered Φ is exact everywhere.  A
    deterministic sample grid seeds the incumbent.
    """
    _check_alpha(alpha)
    if net.input_dim != pwa.n or net.output_dim != pwa.m:
        raise ValueError("network and law dimensions do not match")
    t0 = time.perf_counter()
    builder = MilpBuilder()
    lo_x, hi_x = bounding_box(domain)
    x_cols = builder.add_vars("x", pwa.n, lo_x, hi_x)
    for a, beta in zip(domain.A, domain.b):
        builder.add_ub(x_cols, a, beta)
    enc_net = encode_network_output(net, settings.big_m, 0.0, box=(lo_x, hi_x),
                                    builder=builder, x_cols=x_cols)
    enc_pwa = encode_pwa_law(pwa, domain, settings.big_m, builder=builder,
                             x_cols=x_cols, with_value=True)
    err = enc_pwa.output - enc_net.output
    err_lo = enc_pwa.output_bounds[0] - enc_net.output_bounds[1]
    err_hi = enc_pwa.output_bounds[1] - enc_net.output_bounds[0]
    norm = _norm_objective(builder, err, err_lo, err_hi, alpha,
                           (pwa.m, 1), induced=False)
    problem = builder.build(norm.objective, sense="max")

    warm = None
    best_val = -1.0
    v_cols = builder.blocks["pwa.v"].reshape(pwa.n_regions, pwa.m)
    for x in _candidate_states(pwa, domain, settings.grid_points):
        try:
            ridx = pwa.region_index(x, tol=1e-9)
        except InfeasibleStateError:
            continue
        u = pwa.gains[ridx] @ x + pwa.offsets[ridx]
        e = u - evaluate(net, x)
        val = float(np.abs(e).sum()) if (alpha == 1 and pwa.m > 1) \
            else float(np.abs(e).max())
        if val <= best_val:
            continue
        z = np.zeros(builder.ncols)
        z[x_cols] = x
        _lift_network(z, net, x, enc_net, False, builder)
        rho = np.zeros(pwa.n_regions)
        rho[ridx] = 1.0
        z[enc_pwa.rho_cols] = rho
        z[v_cols[ridx]] = u
        norm.lift(z, e)
        if _check_point(problem, z):
            warm, best_val = z, val

    res = solve_milp(problem, gap_tol=settings.gap_tol,
                     node_limit=settings.node_limit, warm_start=warm)
    witness = res.point[x_cols] if res.point is not None else np.full(pwa.n, np.nan)
    return Certificate(kind="max-error", alpha=float(alpha),
                       value=float(res.value) if res.value is not None else np.nan,
                       witness=witness, gap=float(res.gap), status=res.status,
                       settings=settings.as_dict(),
                       wall_time=time.perf_counter() - t0, nodes=res.nodes)


def _margin(net: MaxoutNetwork, x: np.ndarray) -> float:
    """Smallest winner-vs-runner-up preactivation margin over all neurons."""
    y = np.asarray(x, dtype=float)
    worst = np.inf
    for layer in net.layers:
        zz = layer.preactivations(y).reshape(layer.neurons, layer.channels)
        if layer.channels > 1:
            part = np.sort(zz, axis=1)
            worst = min(worst, float(np.min(part[:, -1] - part[:, -2])))
        y = zz.max(axis=1)
    return worst


def lipschitz(pwa: PwaFunction, net: MaxoutNetwork, domain: Polytope,
              alpha: float = np.inf,
              settings: CertifySettings = CertifySettings()) -> Certificate:
    """Exact L_α(e, domain) = max ‖K_MPC(x) − K_NN(x)‖_α by MILP.

    Requires ε > 0; the ε margin excludes activation boundaries, where
    the gain is undefined.  The norm is the induced matrix norm: maximum
    absolute row sum for α = ∞, column sum for α = 1.
    """
    _check_alpha(alpha)
    if settings.eps <= 0:
        raise ValueError("the Lipschitz encoding requires eps > 0")
    if net.input_dim != pwa.n or net.output_dim != pwa.m:
        raise ValueError("network and law dimensions do not match")
    t0 = time.perf_counter()
    builder = MilpBuilder()
    lo_x, hi_x = bounding_box(domain)
    x_cols = builder.add_vars("x", pwa.n, lo_x, hi_x)
    for a, beta in zip(domain.A, domain.b):
        builder.add_ub(x_cols, a, beta)
    enc_net = encode_network_output(net, settings.big_m, settings.eps,
                                    box=(lo_x, hi_x), builder=builder, x_cols=x_cols)
    enc_net = encode_network_gain(net, settings.w_bound, enc_net, box=(lo_x, hi_x))
    enc_pwa = encode_pwa_law(pwa, domain, settings.big_m, builder=builder,
                             x_cols=x_cols, with_value=False, with_gain=True)
    dk = enc_pwa.gain - enc_net.gain
    dk_lo = enc_pwa.gain_bounds[0] - enc_net.gain_bounds[1]
    dk_hi = enc_pwa.gain_bounds[1] - enc_net.gain_bounds[0]
    norm = _norm_objective(builder, dk, dk_lo, dk_hi, alpha,
                           (pwa.m, pwa.n), induced=True)
    problem = builder.build(norm.objective, sense="max")

    warm = None
    best_val = -1.0
    for x in _candidate_states(pwa, domain, settings.grid_points):
        if _margin(net, x) <= settings.eps * (1 + 1e-9):
            continue
        try:
            ridx = pwa.region_index(x, tol=1e-9)
        except InfeasibleStateError:
            continue
        z = np.zeros(builder.ncols)
        z[x_cols] = x
        K_nn = _lift_network(z, net, x, enc_net, True, builder)
        K_err = (pwa.gains[ridx] - K_nn).ravel()
        val = float(np.abs(K_err.reshape(pwa.m, pwa.n)).sum(axis=1).max()) \
            if alpha == np.inf else \
            float(np.abs(K_err.reshape(pwa.m, pwa.n)).sum(axis=0).max())
        if val <= best_val:
            continue
        rho = np.zeros(pwa.n_regions)
        rho[ridx] = 1.0
        z[enc_pwa.rho_cols] = rho
        z[builder.blocks["pwa.K"]] = pwa.gains[ridx].ravel()
        norm.lift(z, K_err)
        if _check_point(problem, z):
            warm, best_val = z, val

    res = solve_milp(problem, gap_tol=settings.gap_tol,
                     node_limit=settings.node_limit, warm_start=warm)
    witness = res.point[x_cols] if res.point is not None else np.full(pwa.n, np.nan)
    return Certificate(kind="lipschitz", alpha=float(alpha),
                       value=float(res.value) if res.value is not None else np.nan,
                       witness=witness, gap=float(res.gap), status=res.status,
                       settings=settings.as_dict(),
                       wall_time=time.perf_counter() - t0, nodes=res.nodes)


def replay(cert: Certificate, pwa: PwaFunction, net: MaxoutNetwork) -> float:
    """Recompute the certified quantity at the witness in plain arithmetic."""
    from .maxout import local_gain

    x = cert.witness
    if cert.kind == "max-error":
        e = pwa(x) - evaluate(net, x)
        if cert.alpha == np.inf or pwa.m == 1:
            return float(np.max(np.abs(e)))
        return float(np.sum(np.abs(e)))
    K_err = pwa.gain_at(x) - local_gain(net, x, tie_tol=0.0)
    if cert.alpha == np.inf:
        return float(np.abs(K_err).sum(axis=1).max())
    return float(np.abs(K_err).sum(axis=0).max())
