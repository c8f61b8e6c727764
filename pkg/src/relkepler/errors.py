"""Exception hierarchy.

Regime and hypothesis errors carry the violated condition as structured data
(``condition`` plus a ``values`` mapping) so front ends can report it verbatim.
"""


class RelKeplerError(Exception):
    """Base class for all package errors."""


class DomainError(RelKeplerError, ValueError):
    """Argument outside the domain of a formula (origin, superluminal, ...)."""


class RegimeError(DomainError):
    """The (h, L) pair is not in the regime an operation requires."""

    def __init__(self, message, condition=None, values=None):
        super().__init__(message)
        self.condition = condition
        self.values = dict(values or {})

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self),
                "condition": self.condition, "values": self.values}


class HypothesisError(RegimeError):
    """A hypothesis of the existence theorem fails for (T, n, k, sign)."""


class InterpolationDomainError(DomainError):
    """Query outside the sampled range of a tabulated perturbation."""


class IntegrationError(RelKeplerError, RuntimeError):
    """Numerical integration could not be completed."""


class NearCollisionError(IntegrationError):
    """Trajectory dropped below the minimum-radius guard."""


class StiffnessError(IntegrationError):
    """Step size underflow or step budget exhausted."""


class WindingError(RelKeplerError):
    """Angular variation is not close to an integer multiple of 2*pi."""
