"""Exception types raised across the package."""


class PartXError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(PartXError, ValueError):
    pass


class DimensionTooSmall(PartXError, ValueError):
    pass


class FactorizationFailure(PartXError, RuntimeError):
    pass


class InvalidLevel(PartXError, ValueError):
    pass


class InvalidProbability(PartXError, ValueError):
    pass


class EmptyBox(PartXError, ValueError):
    pass


class NoBranchableDimension(PartXError):
    pass


class MissingQuantiles(PartXError, ValueError):
    pass


class NotALeaf(PartXError, KeyError):
    pass


class ConfigInvalid(PartXError, ValueError):
    pass


class PointOutsideDomain(PartXError, ValueError):
    def __init__(self, row: int, message: str = ""):
        self.row = row
        super().__init__(message or f"row {row}: point outside domain")


class MalformedRow(PartXError, ValueError):
    def __init__(self, row: int, message: str = ""):
        self.row = row
        super().__init__(message or f"row {row}: malformed")


class EvaluationError(PartXError, RuntimeError):
    """Objective evaluation failed.

    ``point`` is the offending input; ``report`` is filled in by the driver
    with the partial run report when the failure aborts a run.
    """

    def __init__(self, point, message: str = "", report=None):
        self.point = point
        self.report = report
        super().__init__(message or f"objective failed at {list(point)}")
