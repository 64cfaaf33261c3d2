"""Exception hierarchy shared by all flexsched layers."""


class FlexschedError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(FlexschedError):
    """A domain object was constructed with invalid field values."""


class GridMismatchError(ValidationError):
    """Two series that must share a TimeGrid do not."""


class ModelBuildError(FlexschedError):
    """The scheduling problem is infeasible by construction (detected before the solver runs)."""


class SolveError(FlexschedError):
    """The solver terminated without a usable solution (infeasible / unbounded / numerical failure)."""

    def __init__(self, status: str, message: str = ""):
        self.status = status
        super().__init__(message or f"solve failed with status '{status}'")


class IntegrityError(FlexschedError):
    """A recomputed quantity disagrees with the solver's own report beyond tolerance."""


class InputFormatError(FlexschedError):
    """An input file is missing, malformed, or inconsistent.

    Carries enough location detail (path, optionally line/field) for the CLI
    to print an actionable message.
    """

    def __init__(self, path: str, detail: str, line: int | None = None, field: str | None = None):
        self.path = path
        self.detail = detail
        self.line = line
        self.field = field
        where = path
        if line is not None:
            where += f":{line}"
        if field is not None:
            where += f" (field '{field}')"
        super().__init__(f"{where}: {detail}")
