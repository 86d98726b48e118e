"""Exception types shared across the package."""

__all__ = ["DataError", "BvhParseError", "NumericsError"]


class DataError(Exception):
    """Malformed or inconsistent input data (files, containers, labels)."""


class BvhParseError(DataError):
    """BVH text that violates the grammar; carries the offending line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NumericsError(Exception):
    """A numeric failure (non-finite loss, non-PSD matrix); names the culprit."""

    def __init__(self, message: str, term: str | None = None):
        self.term = term
        super().__init__(message if term is None else f"{message} (term: {term})")
