"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class CRQError(Exception):
    exit_code = 1


class ParseError(CRQError, ValueError):
    """Malformed input file or non-Hermitian polynomial."""

    exit_code = 2


class GeometryError(CRQError):
    """Pseudoconvexity, star-shape or boundary-root failure."""

    exit_code = 3


class NumericError(CRQError, ArithmeticError):
    """Tolerance, divisibility or convergence failure."""

    exit_code = 4


class JetBaseMismatch(NumericError):
    pass


class NotInvertible(NumericError):
    """Constant term vanishes (or is non-positive for real powers/logs)."""


class NotDivisible(NumericError):
    pass


class DegenerateDefiningFunction(GeometryError):
    pass


class NotPseudoconvex(GeometryError):
    pass


class NormalizationObstruction(NumericError):
    """The refinement probe has no usable slope (expected at order n+2)."""
