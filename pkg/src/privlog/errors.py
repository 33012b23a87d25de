class PrivlogError(Exception):
    pass


class LogParseError(PrivlogError, ValueError):
    """Input stream is not well-formed XES or CSV."""

    def __init__(self, message, locus=None):
        self.locus = locus
        super().__init__(f"{message} (at {locus})" if locus else message)


class LogValidationError(PrivlogError, ValueError):
    """Input parsed but violates event log invariants."""


class UnboundableError(PrivlogError, ValueError):
    """Prior plus advantage reaches 1; no finite epsilon bounds the guess."""


class UnreleasableLogError(PrivlogError):
    """Every case was filtered out at the requested delta."""
