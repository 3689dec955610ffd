"""Exception types shared across the package."""


class MaxmpcError(Exception):
    """Base class for all package-specific errors."""


class NumericalBreakdownError(MaxmpcError):
    """Basis factorization or pivoting failed beyond recovery."""


class EmptyPolytopeError(MaxmpcError):
    """Operation requires a nonempty polytope."""


class InfeasibleStateError(MaxmpcError):
    """State lies outside the feasible set of the optimal control problem."""


class DegenerateModelError(MaxmpcError):
    """Model data violates a structural precondition (definiteness, stability)."""


class NoConvergenceError(MaxmpcError):
    """Fixed-point iteration failed to converge within its iteration budget."""


class UnstableMatrixError(MaxmpcError):
    """Closed-loop matrix is not Schur stable."""


class BoundaryPointError(MaxmpcError):
    """Point lies on an activation boundary where the gradient is undefined."""


class LatticeViolationError(MaxmpcError):
    """Max-min lattice identity failed; input function is likely discontinuous."""


class TermExplosionError(MaxmpcError):
    """Difference-of-convex rewriting exceeded the affine-term cap."""


class CertificationError(MaxmpcError):
    """Synthesized network failed its exactness certification."""


class InvalidBigMError(MaxmpcError):
    """Supplied big-M constant is smaller than an observed preactivation bound."""


class InvalidGainBoundError(MaxmpcError):
    """Supplied gain bound is smaller than an observed partial gain product."""


class CoverageGapError(MaxmpcError):
    """A domain sample is not covered by any region of the piecewise law."""


class SamplerStarvationError(MaxmpcError):
    """Rejection sampler acceptance rate fell below its floor."""


class DivergenceError(MaxmpcError):
    """Training loss exceeded the divergence guard."""
