"""Exception hierarchy shared across the package."""


class PseudoQEError(Exception):
    """Base class for all errors raised by pseudoqe."""


class InputEncodingError(PseudoQEError, ValueError):
    pass


class InconsistentScriptError(PseudoQEError, ValueError):
    pass


class InconsistentLengthsError(PseudoQEError, ValueError):
    pass


class InvalidAlignmentError(PseudoQEError, ValueError):
    pass


class InvalidPairError(PseudoQEError, ValueError):
    pass


class NoTrainableDataError(PseudoQEError, ValueError):
    pass


class InvalidParallelCorpusError(PseudoQEError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class DegenerateLineError(PseudoQEError, ValueError):
    """Raised in strict mode for an empty or over-long input line."""

    def __init__(self, message: str, line: int):
        super().__init__(message)
        self.line = line


class BackendUnavailableError(PseudoQEError):
    """Translation backend kept failing after all retries."""


class RequestRejectedError(PseudoQEError):
    """Translation backend rejected the request (non-retryable 4xx)."""

    def __init__(self, message: str, status: int):
        super().__init__(message)
        self.status = status


class CacheCorruptError(PseudoQEError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class OutputExistsError(PseudoQEError, FileExistsError):
    pass


class OutputLockedError(PseudoQEError, RuntimeError):
    """Another build holds the output directory lock."""
