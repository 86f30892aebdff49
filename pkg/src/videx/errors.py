"""Shared exception hierarchy."""


class VidexError(Exception):
    """Base class for all errors raised by this package."""


class MetadataParseError(VidexError):
    """Metadata document is structurally malformed.

    ``path`` points at the offending location (dot/bracket notation).
    """

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.reason = message


class MetadataValidationError(VidexError):
    """Metadata document parsed but violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.path}: {v.rule}: {v.message}" for v in self.violations)
        super().__init__(f"{len(self.violations)} violation(s): {lines}")
