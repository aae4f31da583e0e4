"""Exception hierarchy shared by all diversel modules.

The CLI maps these onto exit codes: ParameterError -> 2 (usage),
DataFormatError -> 3 (bad input data), ExternalServiceError -> 4.
"""


class DiverselError(Exception):
    pass


class ParameterError(DiverselError, ValueError):
    """Caller passed an invalid argument or flag combination."""


class DataFormatError(DiverselError):
    """An input file is malformed or internally inconsistent."""


class ExternalServiceError(DiverselError):
    """A remote endpoint (LLM, embed sidecar) failed after retries."""

    def __init__(self, message: str, status: int | None = None, attempts: int = 1):
        super().__init__(message)
        self.status = status
        self.attempts = attempts
