"""Exception types shared across the package."""


class CPSRiskError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CPSRiskError, ValueError):
    pass


class EdgeListParseError(CPSRiskError, ValueError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class TotalCollapseError(CPSRiskError):
    """Raised when cyber load must be placed but every cyber node is down."""


class ValidationError(CPSRiskError, ValueError):
    pass


class NoCapacityError(CPSRiskError, ValueError):
    pass


class AllocationInfeasibleError(CPSRiskError):
    pass


class DegenerateStateError(CPSRiskError, ZeroDivisionError):
    pass


class SingularProfileError(CPSRiskError, ZeroDivisionError):
    def __init__(self, term: str, detail: str = ""):
        self.term = term
        msg = f"singular recovery profile: {term} is zero"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UndefinedMetricError(CPSRiskError, ZeroDivisionError):
    pass


class SizeBoundError(CPSRiskError, ValueError):
    pass


class StageError(CPSRiskError):
    """Wraps any failure inside an experiment stage, naming the stage."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
