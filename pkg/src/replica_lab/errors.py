"""Exception types shared across the package."""


class ReplicaLabError(Exception):
    pass


class InvalidInstanceError(ReplicaLabError, ValueError):
    pass


class DimacsParseError(ReplicaLabError, ValueError):
    def __init__(self, message: str, line: int | None):
        self.line = line
        super().__init__(f"line {line}: {message}")


class CapacityError(ReplicaLabError):
    """A requested exact computation exceeds its enumeration budget."""


class ConvergenceError(ReplicaLabError):
    pass


class InvalidGroupTableError(ReplicaLabError, ValueError):
    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message)


class ThresholdRangeError(ReplicaLabError, ValueError):
    pass


class VerificationError(ReplicaLabError, AssertionError):
    """An internal identity check failed."""
