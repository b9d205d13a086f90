"""Exception taxonomy shared across the platform.

Domain failures are values where the contract says so (cell errors,
authorization denials); exceptions are reserved for contract violations,
transport failures, and rejected requests. The HTTP layer maps these onto
status codes (authentication 401, authorization 403, not-found 404,
conflict 409, integrity/precondition 422).
"""

from __future__ import annotations


class DiscomError(Exception):
    """Base class for all platform errors."""


class ParseError(DiscomError):
    """Lexical or syntactic failure while parsing an address or formula.

    ``offset`` is the byte offset into the source text; ``expected`` is the
    set of token descriptions that would have been accepted there.
    """

    def __init__(self, message: str, offset: int = 0, expected: frozenset[str] = frozenset()):
        super().__init__(message)
        self.offset = offset
        self.expected = expected

    def __str__(self) -> str:
        base = super().__str__()
        if self.expected:
            return f"{base} at offset {self.offset} (expected {', '.join(sorted(self.expected))})"
        return f"{base} at offset {self.offset}"


class DocumentError(DiscomError):
    """Malformed XML document; carries a human-readable location."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(message)
        self.location = location

    def __str__(self) -> str:
        base = super().__str__()
        return f"{base} ({self.location})" if self.location else base


class AuthenticationError(DiscomError):
    """Caller presented no valid session."""


class AuthorizationError(DiscomError):
    """Caller is authenticated but not allowed to do this."""


class NotFoundError(DiscomError):
    """Referenced entity does not exist."""


class ConflictError(DiscomError):
    """Optimistic-concurrency rejection; carries the current latest version."""

    def __init__(self, message: str, latest_version: int):
        super().__init__(message)
        self.latest_version = latest_version


class IntegrityError(DiscomError):
    """Payload violates a structural invariant (dims, missing sheet, bad doc)."""


class PreconditionError(DiscomError):
    """Request is well-formed but its domain precondition does not hold."""


class StoreCorruptError(DiscomError):
    """Persisted state is damaged; names the offending file/record."""

    def __init__(self, message: str, record: str):
        super().__init__(message)
        self.record = record


class PropagationCycleError(DiscomError):
    """Cross-workbook export chain returns to itself; names the cycle."""

    def __init__(self, export_ids: tuple[str, ...]):
        super().__init__(f"export chain forms a cycle: {', '.join(export_ids)}")
        self.export_ids = export_ids


class TransportError(DiscomError):
    """Network-level failure talking to the platform."""
