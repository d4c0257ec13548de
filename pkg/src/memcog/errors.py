"""Exception hierarchy shared across the engine.

Exit-code mapping for the CLI lives in cli.py; everything here is a plain
exception so library callers can catch by family.
"""

from __future__ import annotations


class MemCogError(Exception):
    """Base class for all engine errors."""


class ValidationError(MemCogError):
    """Input or invariant violation."""


class NotFoundError(MemCogError):
    """A referenced dimension, page, or link does not exist."""


class ParseError(MemCogError):
    """Malformed wiki file; carries file path and 1-based line number."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if path else ""
        super().__init__(f"{where}{message}")


class CycleError(ValidationError):
    """Adding a link would close a temporal_next cycle; carries the path."""

    def __init__(self, message: str, cycle: list[str] | None = None):
        self.cycle = cycle or []
        super().__init__(message)


class BudgetError(MemCogError):
    """A navigation session has exhausted its step budget."""


class InvalidLinkError(MemCogError):
    """follow_link target was not visible in the current observation."""


class DanglingLinkError(MemCogError):
    """follow_link target does not resolve to a readable page."""


class OrderingError(ValidationError):
    """Conversation turns arrived out of timestamp order."""


class IngestionError(MemCogError):
    """Model-client failure during ingestion; retryable at a batch boundary."""

    def __init__(self, message: str, batch: object = None, retryable: bool = True):
        self.batch = batch
        self.retryable = retryable
        super().__init__(message)


class ClientError(MemCogError):
    """Language-model client failure (transport, HTTP, bad payload)."""


class FixtureMissingError(ClientError):
    """The fixture client has no recorded response for a request digest."""

    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"no recorded response for request digest {digest}")


class StructuredOutputError(MemCogError):
    """Model output failed to parse even after one reprompt."""

    def __init__(self, message: str, raw: str = "", trace: object = None):
        self.raw = raw
        self.trace = trace
        super().__init__(message)


class AgentRunError(MemCogError):
    """Client failure mid-loop; carries the partial trace."""

    def __init__(self, message: str, trace: object = None):
        self.trace = trace
        super().__init__(message)


class InfeasibleAllocationError(MemCogError):
    """Session allocation cannot separate a set of mutually conflicting units."""

    def __init__(self, message: str, clique: list[str] | None = None):
        self.clique = clique or []
        super().__init__(message)


class CoverageError(MemCogError):
    """Generated dialogue failed to plant required memory units."""

    def __init__(self, message: str, unplanted: list[str] | None = None):
        self.unplanted = unplanted or []
        super().__init__(message)


class JudgeFormatError(MemCogError):
    """Judge output missing a verdict or carrying an out-of-range score."""


class InsufficientDataError(MemCogError):
    """growth_slope needs at least two groups of data."""
