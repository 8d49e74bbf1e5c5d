"""Exception hierarchy shared by all modules."""


class RobinSpecError(Exception):
    """Base class for every error raised by the package."""


# geometry
class ChainNotClosed(RobinSpecError, ValueError):
    pass


class DegenerateAngle(RobinSpecError, ValueError):
    pass


class SelfIntersection(RobinSpecError, ValueError):
    pass


class ObtuseHalfAngle(RobinSpecError, ValueError):
    pass


class DeltaTooLarge(RobinSpecError, ValueError):
    pass


class NoConvergence(RobinSpecError, ArithmeticError):
    pass


# mesh / fem
class QualityFailure(RobinSpecError, RuntimeError):
    pass


class EmptyDomain(RobinSpecError, ValueError):
    pass


class SingularGeometry(RobinSpecError, ValueError):
    pass


class NotConverged(RobinSpecError, RuntimeError):
    """Eigensolver gave up; ``partial`` holds whatever was computed."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class ShiftTooClose(RobinSpecError, ArithmeticError):
    pass


class ZeroVector(RobinSpecError, ValueError):
    pass


# model1d
class RootBracketFailure(RobinSpecError, ArithmeticError):
    pass


class NonSelfAdjointInput(RobinSpecError, ValueError):
    pass


class GridTooCoarse(RobinSpecError, ArithmeticError):
    def __init__(self, message: str, suggested_points: int | None = None):
        super().__init__(message)
        self.suggested_points = suggested_points


# sectors
class CountUnstable(RobinSpecError, RuntimeError):
    def __init__(self, message: str, counts=None):
        super().__init__(message)
        self.counts = counts


class NegativeGap(RobinSpecError, RuntimeError):
    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


# effective / harness
class FormulaInapplicable(RobinSpecError, ValueError):
    pass


class BracketViolationBeyondBudget(RobinSpecError, AssertionError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class InsufficientSignal(RobinSpecError, ValueError):
    pass
