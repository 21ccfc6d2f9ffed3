"""
Dynoframe Error Classes
"""

from typing import Optional

# Exit statuses used by the command line.
VALIDATION_ERROR = 1
INTERNAL_ERROR = 2


class DynoframeError(Exception):
    """Base exception class for dynoframe errors."""

    def __init__(
        self, message: str, status: Optional[int] = VALIDATION_ERROR, code: Optional[str] = None
    ):
        """
        Initialize a dynoframe error.

        Args:
            message: Error message
            status: Exit status the error maps to on the command line
            code: Stable machine-readable error code (e.g. ``UNKNOWN_VERB``)
        """
        super().__init__(message)
        self.message = message
        self.status = status
        self.code = code

    def __str__(self) -> str:
        if self.status and self.code:
            return f"DynoframeError({self.status}, {self.code}): {self.message}"
        elif self.code:
            return f"DynoframeError({self.code}): {self.message}"
        else:
            return f"DynoframeError: {self.message}"

    def __reduce__(self) -> tuple:
        return (self.__class__, (self.message, self.status, self.code))

    def __repr__(self) -> str:
        return (
            f"DynoframeError(message='{self.message}', status={self.status}, code='{self.code}')"
        )


class FrameParseError(DynoframeError):
    """Raised when structured text cannot be turned into a frame."""

    def __init__(self, message: str, code: str, token_index: Optional[int] = None):
        super().__init__(message, VALIDATION_ERROR, code)
        self.token_index = token_index

    def __reduce__(self) -> tuple:
        return (self.__class__, (self.message, self.code, self.token_index))

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "token": self.token_index}
