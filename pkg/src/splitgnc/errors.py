"""Exception hierarchy shared across the package.

Each class carries a short ``category`` string that the command-line front
end reports on failure.
"""


class RegistrationError(Exception):
    category = "error"


class ValidationError(RegistrationError, ValueError):
    """Input violates a documented invariant (non-finite point, non-rigid matrix, ...)."""

    category = "validation"


class ConfigError(ValidationError):
    category = "config"


class EmptyIndexError(RegistrationError):
    category = "empty-index"


class InsufficientCorrespondencesError(RegistrationError):
    category = "insufficient-correspondences"


class DegenerateGeometryError(RegistrationError):
    category = "degenerate-geometry"


class AllSplitsFailedError(RegistrationError):
    """Raised when every sub-cloud solve failed; ``errors`` holds ``(index, exc)`` pairs."""

    category = "all-splits-failed"

    def __init__(self, errors):
        self.errors = list(errors)
        detail = "; ".join(f"split {i}: {e}" for i, e in self.errors)
        super().__init__(f"every sub-cloud solve failed ({detail})")


class PlyParseError(RegistrationError):
    """Malformed PLY input. ``offset`` is the byte offset where parsing stopped."""

    category = "parse"

    def __init__(self, message, offset=None, record=None):
        self.offset = offset
        self.record = record
        where = []
        if offset is not None:
            where.append(f"byte offset {offset}")
        if record is not None:
            where.append(f"record {record}")
        suffix = f" (at {', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class PlyHeaderError(PlyParseError):
    category = "parse-header"


class PlyLayoutError(PlyParseError):
    category = "parse-layout"


class PlyTruncatedError(PlyParseError):
    category = "parse-truncated"
