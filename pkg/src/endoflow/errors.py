"""Exception hierarchy.

Two families matter downstream: ``ValidationError`` covers bad input data
(model files, candidate endomorphisms/cocycles that fail their defining
identities) and maps to CLI exit code 1; ``InternalInvariantViolation``
covers cross-checks that can only fail through an implementation bug or a
tolerance collapse, and maps to CLI exit code 2.
"""


class ValidationError(ValueError):
    """Input data fails a structural invariant."""


class DimensionMismatch(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class NotAProjection(ValidationError):
    pass


class MembershipError(ValidationError):
    """An operator is not in the algebra it is required to belong to."""


class UnitalityViolation(ValidationError):
    """Candidate endomorphism does not fix the unit."""


class MultiplicativityViolation(ValidationError):
    """Candidate endomorphism is not multiplicative; carries the witness pair."""

    def __init__(self, msg, witness=None, residual=None):
        super().__init__(msg)
        self.witness = witness
        self.residual = residual


class AdjointViolation(ValidationError):
    """Candidate endomorphism does not commute with the adjoint."""

    def __init__(self, msg, witness=None, residual=None):
        super().__init__(msg)
        self.witness = witness
        self.residual = residual


class NotIncreasing(ValidationError):
    """alpha(p) >= p fails, so the corner is not compressible."""


class CommutationViolation(ValidationError):
    """Cocycle entry q_t fails to commute with the t-step image algebra."""

    def __init__(self, t, residual=None):
        super().__init__(f"cocycle entry at t={t} does not commute with the image algebra "
                         f"(residual {residual})")
        self.t = t
        self.residual = residual


class CocycleIdentityViolation(ValidationError):
    """q_{s+t} != q_s * alpha^s(q_t)."""

    def __init__(self, s, t, residual=None):
        super().__init__(f"cocycle identity fails at (s,t)=({s},{t}) (residual {residual})")
        self.s = s
        self.t = t
        self.residual = residual


class ZeroEntry(ValidationError):
    """Projective cocycles must have nonzero entries."""

    def __init__(self, t):
        super().__init__(f"cocycle entry at t={t} is zero")
        self.t = t


class SearchExhausted(ValidationError):
    """Randomized model search gave up within its attempt budget."""


class InternalInvariantViolation(RuntimeError):
    """A theorem-level cross-check failed: implementation bug, never accepted."""


class NotStabilized(InternalInvariantViolation):
    """A monotone projection sequence did not stabilize within the horizon."""


class FactorizationMismatch(InternalInvariantViolation):
    """The two independent routes to the reachable projection disagree."""
