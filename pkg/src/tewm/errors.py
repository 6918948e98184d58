"""Exception hierarchy.

Every error carries a short ``code`` (the class name) and an ``exit_code`` used
by the command-line front end: 1 for invalid input, 2 for numerical failures.
"""


class TewmError(ValueError):
    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


class ValidationError(TewmError):
    exit_code = 1


class NumericalError(TewmError):
    exit_code = 2


class UsageError(ValidationError):
    pass


class MalformedHeader(ValidationError):
    pass


class NonBinaryTreatment(ValidationError):
    def __init__(self, t, value=None):
        self.t = t
        self.value = value
        super().__init__(f"treatment at t={t} is not 0/1 (got {value!r})")


class NonFiniteValue(ValidationError):
    pass


class UnsortedTime(ValidationError):
    pass


class SpecOutOfRange(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class UnsupportedSpec(ValidationError):
    pass


class InsufficientPoints(ValidationError):
    pass


class EmptySubsample(ValidationError):
    def __init__(self, state, message=None):
        self.state = state
        super().__init__(message or f"no rows with lagged treatment equal to {state}")


class OverlapViolation(NumericalError):
    def __init__(self, t, e=None, message=None):
        self.t = t
        self.e = e
        super().__init__(message or f"propensity at t={t} is numerically 0 or 1 (e={e!r})")


class PerfectSeparation(NumericalError):
    pass


class DegenerateDesign(NumericalError):
    pass


class EmptyWindow(NumericalError):
    pass


class ReplicationError(NumericalError):
    def __init__(self, stream, cause):
        self.stream = stream
        self.cause = cause
        super().__init__(f"replication on stream {stream} failed: {cause.code if isinstance(cause, TewmError) else type(cause).__name__}: {cause}")
