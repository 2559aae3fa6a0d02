"""Exception types raised across the package."""


class DriveStepError(Exception):
    """Base class for all planner errors."""

    code = "error"


class MapParseError(DriveStepError):
    code = "parse-error"

    def __init__(self, message, line=None, offset=None):
        self.line = line
        self.offset = offset
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", entry {offset})" if offset is not None else ")")
        super().__init__(message + where)


class ValidationError(DriveStepError, ValueError):
    code = "invalid-input"


class DegenerateTerrainError(DriveStepError):
    code = "degenerate-terrain"


class BoundsError(DriveStepError, IndexError):
    code = "out-of-bounds"


class UnknownTerrainError(DriveStepError):
    code = "unknown-terrain"


class UntraversableSegmentError(DriveStepError):
    code = "untraversable-segment"


class NoPathError(DriveStepError):
    code = "no-path"


class BudgetExhaustedError(DriveStepError):
    code = "budget-exhausted"


class CalibrationError(DriveStepError):
    code = "calibration"


class ExpansionError(DriveStepError):
    code = "expansion"

    def __init__(self, message, step_index=None):
        self.step_index = step_index
        if step_index is not None:
            message = f"step {step_index}: {message}"
        super().__init__(message)


class UnreachableCoMError(DriveStepError):
    code = "unreachable-com"


class DegenerateSupportError(DriveStepError):
    code = "degenerate-support"
