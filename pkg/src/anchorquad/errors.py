"""Semantic exception hierarchy.

Validation-type errors derive from both :class:`AnchorQuadError` and
``ValueError`` so that callers can catch either; the CLI maps them to
exit code 2 and everything else under :class:`AnchorQuadError` to 3.
"""


class AnchorQuadError(Exception):
    """Base class for every error raised by this package."""


class DomainError(AnchorQuadError, ValueError):
    """A point lies outside the kernel's domain."""


class ShapeError(AnchorQuadError, ValueError):
    """A point is missing coordinates required by the active set."""


class NotInSpaceError(AnchorQuadError, ValueError):
    """A function has a component with zero weight, hence infinite norm."""


class ConfigError(AnchorQuadError, ValueError):
    """Invalid or incomplete configuration (e.g. weights not bound to C0)."""


class ParameterError(AnchorQuadError, ValueError):
    """An operation parameter violates its contract."""


class UnsupportedFamilyError(AnchorQuadError):
    """The weight family admits no computable tail bound for this operation."""


class EnumerationError(AnchorQuadError):
    """Support enumeration exceeded its candidate cap without terminating."""


class BudgetError(AnchorQuadError):
    """A combinatorial guard (e.g. 2^|u| evaluations) was exceeded."""


class DegenerateInputError(AnchorQuadError):
    """The requested construction is vacuous (e.g. no uncovered mass)."""


class AlgorithmClassError(AnchorQuadError):
    """An algorithm failed certification for the class required here."""


class IntegrationFailureError(AnchorQuadError):
    """Numeric quadrature for kernel constants did not converge."""
