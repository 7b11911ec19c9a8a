"""Exception hierarchy shared by all treenav modules.

Every error that crosses a module boundary derives from :class:`TreenavError`
so callers (CLI, HTTP facade, eval harness) can map failures to exit codes,
HTTP statuses, or eval records without string matching.
"""

from __future__ import annotations


class TreenavError(Exception):
    """Base class for all domain errors."""

    code = "error"


class UnknownNode(TreenavError):
    """A node key was referenced that does not exist in the tree."""

    code = "unknown_node"


class MalformedSource(TreenavError):
    """A source document could not be parsed under its declared format."""

    code = "malformed_source"


class DuplicateKey(TreenavError):
    """Two records in one source share a transition key."""

    code = "duplicate_key"


class MissingField(TreenavError):
    """A source record omits a required edge-list field."""

    code = "missing_field"


class NotFound(TreenavError):
    """A tree version or session id does not exist in the store."""

    code = "not_found"


class StoreUnavailable(TreenavError):
    """The persistence backend failed at the I/O level."""

    code = "store_unavailable"


class SessionBusy(TreenavError):
    """A turn is already in flight for this session."""

    code = "session_busy"


class BackendError(TreenavError):
    """The chat backend returned a non-success status or refused the call."""

    code = "backend_error"

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class BackendTimeout(BackendError):
    """The chat backend did not answer within the configured timeout."""

    code = "backend_timeout"

    def __init__(self, message: str):
        super().__init__(message, status=None)


class MalformedResponse(BackendError):
    """The chat backend answered with a body we could not interpret."""

    code = "malformed_response"

    def __init__(self, message: str):
        super().__init__(message, status=None)


class MalformedDecision(TreenavError):
    """A model reply did not contain the expected structured decision."""

    code = "malformed_decision"


class InvalidTransition(TreenavError):
    """The evaluator named a transition that was not offered to it."""

    code = "invalid_transition"

    def __init__(self, message: str, next_state: str | None = None):
        super().__init__(message)
        self.next_state = next_state


class EvaluatorProtocolError(TreenavError):
    """The evaluator kept violating the reply protocol after a re-prompt."""

    code = "evaluator_protocol_error"


class HopLimitExceeded(TreenavError):
    """A single turn tried to traverse more hops than the configured cap."""

    code = "hop_limit_exceeded"


class EmptyGeneration(TreenavError):
    """The generation step produced an empty user-facing message."""

    code = "empty_generation"


class DatasetError(TreenavError):
    """An annotated dataset row is inconsistent with the referenced tree."""

    code = "dataset_error"

    def __init__(self, message: str, turn_id: str | None = None):
        super().__init__(message)
        self.turn_id = turn_id


class MetricsError(TreenavError):
    """Metric computation was asked for something it cannot answer."""

    code = "metrics_error"
