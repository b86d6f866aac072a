"""Exception hierarchy.

Every error carries the name of the module that raised it so that batch
front-ends can report provenance without parsing tracebacks.
"""


class ThermoplateError(Exception):
    module = "thermoplate"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class NumericalFailure(ThermoplateError):
    """Base class for failures of a numerical routine (exit code 2)."""


class ShapeMismatch(ThermoplateError, ValueError):
    module = "grid"


class SingularResolvent(NumericalFailure):
    module = "symbol"


class DegenerateSymbol(NumericalFailure):
    module = "symbol"


class ZeroModeNotInvertible(NumericalFailure):
    module = "grid"


class BoundaryViolation(ThermoplateError, ValueError):
    module = "extension"


class ZeroForcing(NumericalFailure):
    module = "linear"


class NoConvergence(NumericalFailure):
    module = "nonlinear"

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InsufficientBand(NumericalFailure):
    module = "nonlinear"


class MissingIndex(ThermoplateError, KeyError):
    module = "multiplier"


class NonFiniteValue(NumericalFailure):
    module = "multiplier"


class DegenerateDenominator(NumericalFailure):
    module = "multiplier"


class PreconditionViolated(ThermoplateError, ValueError):
    module = "multiplier"


class ConfigInvalid(ThermoplateError, ValueError):
    module = "cli"
