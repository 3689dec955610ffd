"""Exact maxout representations of piecewise-affine functions.

A continuous PWA function F with pieces ℓ_i on regions R_i satisfies the
max-min lattice identity F = max_i min_{j∈S_i} ℓ_j where S_i collects the
pieces dominating ℓ_i on R_i.  Rewriting every min through

    min_{k∈S} ℓ_k = Σ_{j∈S} ℓ_j − max_{k∈S} (Σ_{j∈S} ℓ_j − ℓ_k)

and pushing the subtraction through the outer max turns F into a
difference of two convex max-of-affine functions — a one-hidden-layer
maxout network with two neurons and output weights (1, −1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import CertificationError, LatticeViolationError, TermExplosionError
from .geometry import Polytope, bounding_box, sample_rejection
from .maxout import MaxoutLayer, MaxoutNetwork, evaluate
from .mpc import PwaFunction
from .optim import LinearProgram, solve_lp

logger = logging.getLogger(__name__)

MERGE_TOL = 1e-9
DOMINANCE_TOL = 1e-9


@dataclass
class AffineList:
    """Terms βx + γ whose pointwise max is a convex PWA function."""

    betas: np.ndarray  # (k, n)
    gammas: np.ndarray  # (k,)

    def __post_init__(self) -> None:
        self.betas = np.atleast_2d(np.asarray(self.betas, dtype=float))
        self.gammas = np.asarray(self.gammas, dtype=float).reshape(-1)
        if self.betas.shape[0] != self.gammas.size:
            raise ValueError("term count mismatch")

    def __len__(self) -> int:
        return self.gammas.size

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return (X @ self.betas.T + self.gammas).max(axis=1)

    def shifted(self, beta: np.ndarray, gamma: float) -> "AffineList":
        return AffineList(self.betas + beta, self.gammas + gamma)


@dataclass
class DcDecomposition:
    """F = max(p_terms) − max(q_terms) for one output dimension."""

    p_terms: AffineList
    q_terms: AffineList


def lattice_rep(pwa: PwaFunction, dim: int = 0, tol: float = DOMINANCE_TOL) -> list[list[int]]:
    """Dominance sets S_i = {j : ℓ_j ≥ ℓ_i on R_i} (one LP per pair).

    The lattice identity F = max_i min_{j∈S_i} ℓ_j is verified on 10³
    domain samples; failure signals a discontinuous input.
    """
    betas, gammas = pwa.pieces(dim)
    r = len(pwa.regions)
    sets: list[list[int]] = []
    for i in range(r):
        R = pwa.regions[i]
        S = []
        for j in range(r):
            if j == i:
                S.append(j)
                continue
            diff = betas[j] - betas[i]
            res = solve_lp(LinearProgram(cost=diff, A=R.A, b=R.b))
            if not res.optimal:
                continue  # unbounded below on R_i: never dominates
            if res.value + (gammas[j] - gammas[i]) >= -tol:
                S.append(j)
        sets.append(S)
    rng = np.random.default_rng(0)
    X = sample_rejection(pwa.domain, 1000, rng)
    target = np.array([pwa(x)[dim] for x in X])
    vals = X @ betas.T + gammas
    lattice = np.max(
        np.stack([vals[:, S].min(axis=1) for S in sets], axis=1), axis=1)
    err = float(np.max(np.abs(lattice - target)))
    if err > 1e-7:
        raise LatticeViolationError(
            f"max-min identity failed by {err:.2e}; input may be discontinuous")
    return sets


def _dedupe(terms: AffineList, tol: float = MERGE_TOL) -> AffineList:
    """Collapse terms equal in all coefficients within ``tol``."""
    kept_b: list[np.ndarray] = []
    kept_g: list[float] = []
    for beta, gamma in zip(terms.betas, terms.gammas):
        dup = any(np.all(np.abs(beta - b2) <= tol) and abs(gamma - g2) <= tol
                  for b2, g2 in zip(kept_b, kept_g))
        if not dup:
            kept_b.append(beta)
            kept_g.append(float(gamma))
    return AffineList(np.array(kept_b), np.array(kept_g))


def _box_screen(terms: AffineList, lo: np.ndarray, hi: np.ndarray,
                tol: float) -> np.ndarray:
    """Drop terms dominated by a single kept term on the whole box."""
    k = len(terms)
    keep = np.ones(k, dtype=bool)
    for j in range(k):
        kept = np.nonzero(keep[:j])[0]
        if kept.size == 0:
            continue
        d_beta = terms.betas[kept] - terms.betas[j]
        d_gamma = terms.gammas[kept] - terms.gammas[j]
        worst = d_gamma + np.minimum(d_beta * lo, d_beta * hi).sum(axis=1)
        if np.any(worst >= -tol):
            keep[j] = False
    return keep


def prune_dominated(terms: AffineList, domain: Polytope, tol: float = DOMINANCE_TOL,
                    grid: np.ndarray | None = None) -> AffineList:
    """Keep only terms that attain the upper envelope somewhere on the domain.

    Term t survives iff max_{x∈domain} min_{k≠t}(t − other_k)(x) > −tol,
    one LP (variables x plus an epigraph slack) per term.  Two screens cut
    the LP count: single-term dominance over the bounding box, and terms
    winning the argmax at a domain sample are kept without an LP.
    Dropping a non-attaining term never changes the max.
    """
    terms = _dedupe(terms)
    if len(terms) == 1:
        return terms
    n = domain.dim
    lo, hi = bounding_box(domain)
    keep = _box_screen(terms, lo, hi, tol)
    idx = np.nonzero(keep)[0]
    terms = AffineList(terms.betas[idx], terms.gammas[idx])
    if len(terms) == 1:
        return terms
    if grid is None:
        grid = sample_rejection(domain, 200, np.random.default_rng(0))
    vals = grid @ terms.betas.T + terms.gammas
    winners = np.unique(np.argmax(vals, axis=1))
    certain = np.zeros(len(terms), dtype=bool)
    certain[winners] = True

    keep = np.ones(len(terms), dtype=bool)
    for t in range(len(terms)):
        if certain[t]:
            continue
        others = np.nonzero(keep & (np.arange(len(terms)) != t))[0]
        if others.size == 0:
            break
        # max z  s.t.  z <= (beta_t - beta_k) x + (gamma_t - gamma_k), x in domain
        k = others.size
        A = np.zeros((k + domain.nrows, n + 1))
        b = np.zeros(k + domain.nrows)
        A[:k, :n] = terms.betas[others] - terms.betas[t]
        A[:k, n] = 1.0
        b[:k] = terms.gammas[t] - terms.gammas[others]
        A[k:, :n] = domain.A
        b[k:] = domain.b
        cost = np.zeros(n + 1)
        cost[n] = -1.0
        res = solve_lp(LinearProgram(cost=cost, A=A, b=b))
        if res.optimal and -res.value <= -tol:
            keep[t] = False
    return AffineList(terms.betas[keep], terms.gammas[keep])


def _max_sum(a: AffineList, b: AffineList, domain: Polytope, cap: int,
             grid: np.ndarray | None = None) -> AffineList:
    """Envelope of {a_i + b_j}: the max-list of the sum of two convex maxes."""
    nb = len(a) * len(b)
    if nb > cap:
        raise TermExplosionError(f"{nb} affine terms before pruning exceeds the cap {cap}")
    betas = (a.betas[:, None, :] + b.betas[None, :, :]).reshape(nb, -1)
    gammas = (a.gammas[:, None] + b.gammas[None, :]).reshape(nb)
    return prune_dominated(AffineList(betas, gammas), domain, grid=grid)


def _max_union(lists: list[AffineList], domain: Polytope, cap: int,
               grid: np.ndarray | None = None) -> AffineList:
    betas = np.vstack([t.betas for t in lists])
    gammas = np.concatenate([t.gammas for t in lists])
    if gammas.size > cap:
        raise TermExplosionError(f"{gammas.size} affine terms before pruning exceeds the cap {cap}")
    return prune_dominated(AffineList(betas, gammas), domain, grid=grid)


def dc_decompose(lattice: list[list[int]], pieces: tuple[np.ndarray, np.ndarray],
                 domain: Polytope, cap: int = 10_000) -> DcDecomposition:
    """Difference-of-convex form from a max-min lattice.

    Each inner min over S becomes (Σℓ) − max_k(Σℓ − ℓ_k); the outer max
    of differences p_i − q_i becomes max_i(p_i + Σ_{k≠i} q_k) − Σ_k q_k,
    with the sums expanded incrementally and dominated terms pruned after
    every product step.
    """
    betas, gammas = pieces
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    gammas = np.asarray(gammas, dtype=float).reshape(-1)

    grid = sample_rejection(domain, 200, np.random.default_rng(0))
    seen: set[tuple[int, ...]] = set()
    inner: list[tuple[np.ndarray, float, AffineList]] = []  # (s_beta, s_gamma, c)
    for S in lattice:
        key = tuple(sorted(S))
        if key in seen:
            continue
        seen.add(key)
        s_beta = betas[list(key)].sum(axis=0)
        s_gamma = float(gammas[list(key)].sum())
        c = AffineList(s_beta - betas[list(key)], s_gamma - gammas[list(key)])
        inner.append((s_beta, s_gamma, prune_dominated(c, domain, grid=grid)))

    r = len(inner)
    if r == 1:
        s_beta, s_gamma, c = inner[0]
        p = AffineList(np.array([s_beta]), np.array([s_gamma]))
        return DcDecomposition(p_terms=p, q_terms=c)

    # prefix[i] = q_0 ⊕ … ⊕ q_{i-1}, suffix[i] = q_{i+1} ⊕ … ⊕ q_{r-1}
    unit = AffineList(np.zeros((1, betas.shape[1])), np.zeros(1))
    prefix = [unit]
    for k in range(r - 1):
        prefix.append(_max_sum(prefix[-1], inner[k][2], domain, cap, grid))
    suffix = [unit]
    for k in range(r - 1, 0, -1):
        suffix.append(_max_sum(suffix[-1], inner[k][2], domain, cap, grid))
    suffix.reverse()

    q_terms = _max_sum(prefix[-1], inner[-1][2], domain, cap, grid)
    parts = []
    for i, (s_beta, s_gamma, _) in enumerate(inner):
        rest = _max_sum(prefix[i], suffix[i], domain, cap, grid)
        parts.append(rest.shifted(s_beta, s_gamma))
    p_terms = _max_union(parts, domain, cap, grid)

    rng = np.random.default_rng(1)
    X = sample_rejection(domain, 1000, rng)
    vals = X @ betas.T + gammas
    target = np.max(
        np.stack([vals[:, sorted(S)].min(axis=1) for S in
                  {tuple(sorted(S)) for S in lattice}], axis=1), axis=1)
    got = p_terms(X) - q_terms(X)
    err = float(np.max(np.abs(got - target)))
    if err > 1e-7:
        raise LatticeViolationError(f"difference-of-convex identity failed by {err:.2e}")
    return DcDecomposition(p_terms=p_terms, q_terms=q_terms)


def _pad_to(terms: AffineList, p: int) -> AffineList:
    """Duplicate the first term until the list holds ``p`` channels."""
    extra = p - len(terms)
    if extra <= 0:
        return terms
    betas = np.vstack([terms.betas, np.repeat(terms.betas[:1], extra, axis=0)])
    gammas = np.concatenate([terms.gammas, np.repeat(terms.gammas[:1], extra)])
    return AffineList(betas, gammas)


def _assemble_two_neuron(decomps: list[DcDecomposition], n: int) -> MaxoutNetwork:
    """Stack per-output DC pairs into one network (block-diagonal layer)."""
    p1 = max(max(len(d.p_terms), len(d.q_terms)) for d in decomps)
    m = len(decomps)
    W = np.zeros((2 * p1 * m, n))
    b = np.zeros(2 * p1 * m)
    W_out = np.zeros((m, 2 * m))
    for d_idx, d in enumerate(decomps):
        p = _pad_to(d.p_terms, p1)
        q = _pad_to(d.q_terms, p1)
        base = d_idx * 2 * p1
        W[base: base + p1] = p.betas
        b[base: base + p1] = p.gammas
        W[base + p1: base + 2 * p1] = q.betas
        b[base + p1: base + 2 * p1] = q.gammas
        W_out[d_idx, 2 * d_idx] = 1.0
        W_out[d_idx, 2 * d_idx + 1] = -1.0
    layer = MaxoutLayer(weights=W, biases=b, channels=p1, neurons=2 * m)
    return MaxoutNetwork(layers=(layer,), output_weights=W_out,
                         output_biases=np.zeros(m))


def build_exact_type1(pwa: PwaFunction, cap: int = 10_000, certify_tol: float = 1e-6,
                      run_certification: bool = True,
                      settings=None) -> MaxoutNetwork:
    """One-hidden-layer exact network: two maxout neurons per output.

    The convex/concave parts come from the lattice plus the DC rewriting;
    exactness is certified by the max-error MILP unless
    ``run_certification`` is disabled.
    """
    decomps = []
    for dim in range(pwa.m):
        lattice = lattice_rep(pwa, dim)
        decomps.append(dc_decompose(lattice, pwa.pieces(dim), pwa.domain, cap=cap))
    net = _assemble_two_neuron(decomps, pwa.n)
    if run_certification:
        from .certify import CertifySettings, max_error
        cert = max_error(pwa, net, pwa.domain, alpha=np.inf,
                         settings=settings or CertifySettings())
        if cert.value > certify_tol:
            raise CertificationError(
                f"synthesized network has certified max error {cert.value:.3e} > {certify_tol:.1e}")
        logger.info("exact synthesis certified: max error %.3e (gap %.1e)",
                    cert.value, cert.gap)
    return net


def build_exact_1d(pwa: PwaFunction, tol: float = 1e-9) -> MaxoutNetwork:
    """Hinge construction for scalar laws on an interval.

    Scanning breakpoints from the right, each slope change adds one hinge
    c·max(0, x_k − x); positive changes feed the convex neuron, negative
    ones the concave neuron.  For the saturated two-break law this
    reproduces the two-neuron network max{−x,−1} − max{−x−1,0}.
    """
    if pwa.n != 1 or pwa.m != 1:
        raise ValueError("hinge construction requires a scalar law on the line")
    intervals = []
    for R, K, c in zip(pwa.regions, pwa.gains, pwa.offsets):
        lo, hi = bounding_box(R)
        intervals.append((float(lo[0]), float(hi[0]), float(K[0, 0]), float(c[0])))
    intervals.sort()
    for (l0, h0, a0, b0), (l1, h1, a1, b1) in zip(intervals, intervals[1:]):
        if l1 < h0 - 1e-7 or l1 > h0 + 1e-7:
            raise ValueError("regions must tile the interval without gaps or overlap")
        if abs((a0 * h0 + b0) - (a1 * l1 + b1)) > 1e-7:
            raise ValueError("pieces disagree at a breakpoint; law is discontinuous")

    _, _, a_right, b_right = intervals[-1]
    p_pieces = [(a_right, b_right)]
    q_pieces = [(0.0, 0.0)]
    for (l0, h0, a_left, _), (_, _, a_right_k, _) in zip(intervals[:-1][::-1],
                                                         intervals[1:][::-1]):
        x_k = h0
        c = a_right_k - a_left
        if abs(c) <= tol:
            continue
        if c > 0:
            a, b = p_pieces[-1]
            p_pieces.append((a - c, b + c * x_k))
        else:
            a, b = q_pieces[-1]
            q_pieces.append((a - abs(c), b + abs(c) * x_k))
    p1 = max(len(p_pieces), len(q_pieces))
    p = _pad_to(AffineList(np.array([[a] for a, _ in p_pieces]),
                           np.array([b for _, b in p_pieces])), p1)
    q = _pad_to(AffineList(np.array([[a] for a, _ in q_pieces]),
                           np.array([b for _, b in q_pieces])), p1)
    layer = MaxoutLayer(weights=np.vstack([p.betas, q.betas]),
                        biases=np.concatenate([p.gammas, q.gammas]),
                        channels=p1, neurons=2)
    return MaxoutNetwork(layers=(layer,), output_weights=np.array([[1.0, -1.0]]),
                         output_biases=np.zeros(1))
