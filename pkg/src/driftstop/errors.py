"""Exception hierarchy.

Every error raised on purpose by the package derives from ``DriftStopError``
so the CLI can map it onto an exit code.
"""


class DriftStopError(Exception):
    """Base class for package errors."""


class PriorError(DriftStopError, ValueError):
    pass


class SignMassViolation(PriorError):
    """Prior puts no mass on one side of zero, so the selling problem is trivial."""


class DegenerateParameter(PriorError):
    pass


class ShiftBreaksSignMass(PriorError):
    """Discounting moved the whole prior to one side of zero."""


class UnsupportedKind(PriorError):
    pass


class FilteringError(DriftStopError):
    pass


class NumericalUnderflow(FilteringError):
    pass


class OutOfSupport(FilteringError, ValueError):
    pass


class BracketFailure(FilteringError):
    pass


class SolverError(DriftStopError):
    pass


class GridTooCoarse(SolverError):
    pass


class DomainTooNarrow(SolverError):
    pass


class StabilityViolation(SolverError):
    def __init__(self, message: str, required_dt: float):
        super().__init__(message)
        self.required_dt = required_dt


class OutOfGrid(SolverError, ValueError):
    pass


class EngineError(DriftStopError):
    pass


class WrongPriorKind(EngineError):
    pass


class EngineUnavailable(EngineError):
    pass


class NoRootInBracket(EngineError):
    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(message)
        self.bracket = bracket


class ConfigError(DriftStopError, ValueError):
    pass
