"""Exception types shared across the package."""


class UttdiarError(Exception):
    """Base class for all library-specific errors."""


class InvalidInputError(UttdiarError, ValueError):
    """An argument violates an operation's preconditions."""


class InfeasibleError(UttdiarError):
    """No channel assignment can satisfy the overlap constraints."""


class ConstraintViolationError(UttdiarError):
    """An assignment maps two overlapping utterances to the same channel."""


class DegenerateEmbeddingError(UttdiarError):
    """A weighted embedding sum has (near-)zero norm and cannot be normalized."""


class RttmParseError(UttdiarError):
    """Malformed RTTM input; carries the offending 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class UndefinedDerError(UttdiarError):
    """DER was requested but the scored reference speech time is zero."""


class PlacementError(UttdiarError):
    """The simulator could not place every utterance under the concurrency cap."""

    def __init__(self, dropped):
        self.dropped = list(dropped)
        super().__init__(
            f"could not place {len(self.dropped)} utterance(s) under the "
            f"concurrency cap: {self.dropped}"
        )

    def __reduce__(self):
        # keep .dropped intact across pickling (process-pool workers)
        return (PlacementError, (self.dropped,))
