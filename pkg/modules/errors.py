"""
Q4RPD Errors

Exception types raised by the routing modules. Value-like problems derive from
ValueError, infeasibility found while solving derives from RuntimeError.
"""


class Q4rpdError(Exception):
    """Base class for every error raised by the Q4RPD modules."""


# Instance and travel data
class AsymmetricMatrix(Q4rpdError, ValueError):
    """Explicit travel matrix is not symmetric."""


class NegativeEntry(Q4rpdError, ValueError):
    """Explicit travel matrix has a negative entry."""


class InstanceFormatError(Q4rpdError, ValueError):
    """Instance document cannot be parsed."""


# Constrained quadratic models
class LengthMismatch(Q4rpdError, ValueError):
    """Assignment length does not match the model variable count."""


# Single routing problem
class SpecInvalid(Q4rpdError, ValueError):
    """SRP request violates its invariants."""


class DestinationNotLast(Q4rpdError, ValueError):
    """Assignment visits something after the (sub-)route destination."""


class InfeasibleAssignment(Q4rpdError, ValueError):
    """Assignment breaks the route structure or an upper bound."""


# Solvers
class NoFeasibleRoute(Q4rpdError, RuntimeError):
    """No route satisfies rt, W and D for the request."""

    def __init__(self, message: str, context: dict = None):
        super().__init__(message)
        self.context = dict(context or {})

    def __str__(self):
        if not self.context:
            return super().__str__()
        details = ', '.join(f"{key}={value}" for key, value in self.context.items())
        return f"{super().__str__()} ({details})"


class TooLarge(Q4rpdError, ValueError):
    """Problem exceeds the size budget of an exact method."""


# Orchestrator
class EmptyFleet(Q4rpdError, ValueError):
    """Fleet has no trucks."""


class FleetExhausted(Q4rpdError, RuntimeError):
    """Deliveries remain but every truck has been used."""


class NotATpDelivery(Q4rpdError, ValueError):
    """Reachability was asked for a delivery without deadline."""


class NonPositiveRt(Q4rpdError, RuntimeError):
    """Selected trajectory has no time left."""


class DeadlineImpossible(Q4rpdError, RuntimeError):
    """No truck can serve a TP delivery before its deadline."""


class ChainBroken(Q4rpdError, ValueError):
    """Sub-routes do not link into a depot-to-depot route."""


# Validation and harness
class MalformedSolution(Q4rpdError, ValueError):
    """Solution document is structurally incomplete."""


class ProfileInvalid(Q4rpdError, ValueError):
    """Instance profile cannot produce a valid instance."""


class DatasetFormatError(Q4rpdError, ValueError):
    """Published dataset files are not in a recognised format."""

    def __init__(self, message: str, report: list = None):
        super().__init__(message)
        self.report = list(report or [])


class InstanceRejected(Q4rpdError, ValueError):
    """Instance failed validation and cannot be solved."""

    def __init__(self, message: str, issues: list = None):
        super().__init__(message)
        self.issues = list(issues or [])
