"""Exception types shared across the package."""

from __future__ import annotations


class ParseError(Exception):
    """A graph input file could not be parsed.

    Carries the 1-based line number (0 when the failure is not tied to a
    single line, e.g. malformed JSON) and a human-readable reason.
    """

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ValidationError(Exception):
    """A loaded graph violated a structural invariant."""

    def __init__(self, report):
        super().__init__("; ".join(report.errors) or "validation failed")
        self.report = report


class UnknownNode(KeyError):
    """A node id was referenced that is not present in the graph."""


class TransportError(Exception):
    """The chat endpoint was unreachable or kept failing after retries."""


class EndpointError(Exception):
    """The chat endpoint answered with a non-retryable error status."""

    def __init__(self, status: int, body: str):
        super().__init__(f"endpoint returned {status}: {body[:200]}")
        self.status = status
        self.body = body


class ParseFailure(Exception):
    """A model response did not follow the requested output format."""


class GenerationBudgetExceeded(Exception):
    """Too large a fraction of generation targets failed after retries.

    ``records`` holds the task records that were produced before the
    budget was exceeded so callers can preserve partial output.
    """

    def __init__(self, failed: int, total: int, records=None):
        super().__init__(
            f"{failed} of {total} generation targets failed after retries"
        )
        self.failed = failed
        self.total = total
        self.records = list(records) if records is not None else []


class VocabTooSmall(Exception):
    """The relation vocabulary cannot support a 10-way choice item."""


class JudgeParseFailure(Exception):
    """The judge model never produced a readable verdict."""


class CorpusSchemaError(Exception):
    """A corpus file or manifest does not match the documented schema."""
