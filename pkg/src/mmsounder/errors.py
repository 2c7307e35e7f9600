"""Exception hierarchy.

Validation errors describe bad inputs (configuration, arguments, shapes);
runtime errors describe conditions discovered while processing valid inputs.
The CLI maps the two families to distinct exit codes.
"""


class SounderError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SounderError, ValueError):
    """Input failed validation."""


class RuntimeSounderError(SounderError, RuntimeError):
    """Valid input could not be processed."""


class InvalidConfigError(ValidationError):
    pass


class LengthMismatchError(ValidationError):
    pass


class InvalidCellCountError(ValidationError):
    pass


class UnbalancedAssignmentError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class CoincidentPositionsError(ValidationError):
    pass


class IncompleteSweepError(ValidationError):
    pass


class OutOfSpanError(RuntimeSounderError):
    """Requested time lies outside a trajectory's time span."""


class StationaryError(RuntimeSounderError):
    """Heading is undefined because the receiver barely moved."""


class MissingGpsError(RuntimeSounderError):
    pass


class InsufficientSamplesError(RuntimeSounderError):
    pass


class DegenerateFitError(RuntimeSounderError):
    pass
