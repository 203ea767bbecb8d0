"""Exception hierarchy.

Validation errors (bad ids, bad geometry, failed preconditions) derive from
``ValidationError``; numerical failures derive from ``NumericalError``. The
CLI maps the two families onto distinct exit codes.
"""


class PolymassError(Exception):
    """Base class for all package errors."""


class ValidationError(PolymassError, ValueError):
    """A precondition on inputs was violated."""


class DimensionError(ValidationError):
    pass


class SmallnessError(ValidationError):
    """Perturbation too large for the smallness assumption |h| < eps(n)."""


class DomainError(ValidationError):
    """A point or surface reaches inside the metric's inner cutoff radius."""


class GeometryError(ValidationError):
    """Unbounded, degenerate or otherwise invalid polyhedron data."""


class InvalidOriginError(GeometryError):
    pass


class AngleConditionError(ValidationError):
    """Some edge violates |sin(dihedral angle)| >= c."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class UnknownIdError(ValidationError):
    pass


class NumericalError(PolymassError, ArithmeticError):
    pass


class ConditioningError(NumericalError):
    """An arccos argument left [-1, 1] by more than round-off."""


class QuadratureError(NumericalError):
    """An integrand returned a non-finite value at a quadrature node."""
