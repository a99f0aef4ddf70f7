"""Exception types raised across the package.

Every error is a subclass of :class:`CubicMomentsError`, so callers can trap
the whole family with one clause while tests pin the precise subclass.
"""


class CubicMomentsError(Exception):
    """Base class for all errors raised by this package."""


# --- curve construction / group law ---------------------------------------


class RepeatedRoot(CubicMomentsError):
    """The requested Weierstrass cubic would be singular (a repeated root)."""


class OrderViolation(CubicMomentsError):
    """Real branch-point data was not supplied in strictly increasing order."""


class OffCurve(CubicMomentsError):
    """A point failed the on-curve residual test."""


class EmptyComponent(CubicMomentsError):
    """A component label does not exist for the curve's topology."""


class DegenerateLine(CubicMomentsError):
    """A required line construction collapsed (coincident defining points)."""


# --- divisors / intersection ----------------------------------------------


class CommonComponent(CubicMomentsError):
    """The two input curves share a component; the intersection is not finite."""


class IllConditioned(CubicMomentsError):
    """Root clustering could not assign multiplicities at the working tolerance."""


class NotTotallyReal(CubicMomentsError):
    """An operation restricted to totally real divisors received complex entries."""


class OutOfRange(CubicMomentsError):
    """A degree argument lies outside the range the formula covers."""


# --- forms / certificates ---------------------------------------------------


class JetFailure(CubicMomentsError):
    """A local parametrization of the curve could not be built at a point."""


class NoQuadric(CubicMomentsError):
    """No form of the requested degree doubly vanishes on the divisor."""


class RankAmbiguous(CubicMomentsError):
    """The interpolation kernel is not one-dimensional at the tolerance."""


class VerificationFailed(CubicMomentsError):
    """A certificate identity failed its residual check."""


class AtomCollision(CubicMomentsError):
    """Constructed auxiliary atoms collided with the prescribed ones."""


# --- moments ----------------------------------------------------------------


class AtomAtInfinity(CubicMomentsError):
    """An atom lies on the working line at infinity; it has no affine moments."""


class CurveMismatch(CubicMomentsError):
    """Two moment functionals do not refer to the same curve."""


class RankNotStabilized(CubicMomentsError):
    """Moment-matrix ranks did not stabilize between the top two levels."""


class ComplexAtoms(CubicMomentsError):
    """Atom extraction produced points that are not real curve points."""


class RetriesExhausted(CubicMomentsError):
    """A randomized construction failed after its retry budget."""


class NotFound(CubicMomentsError):
    """No admissible second representation was found within the start budget."""
