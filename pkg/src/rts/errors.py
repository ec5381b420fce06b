"""Error taxonomy shared by every module.

All domain errors derive from RtsError so callers (CLI, HTTP layer) can map
them to exit codes / status codes by class. The class name doubles as the
machine-readable error code in API responses.
"""


class RtsError(Exception):
    """Base class for all domain errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class MalformedInput(RtsError):
    """Input is not parseable as the documented format."""


class SchemaViolation(RtsError):
    """Parsed document violates the dataset schema (missing field, wrong type)."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownRelease(RtsError):
    """Release identifier not present in the dataset's release list."""


class UnknownTestId(RtsError):
    """Test id does not resolve within the dataset / suite."""


class ScopeMismatch(RtsError):
    """Feature scope disagrees with the catalog or the matrix it is applied to."""


class DimensionMismatch(RtsError):
    """Vector length disagrees with model/matrix dimensionality."""


class DegenerateLabels(RtsError):
    """A label class required for training or assessment is missing or too small."""


class EmptySuite(RtsError):
    """Operation requires a non-empty ranked suite."""


class CutoffOutsideInterval(RtsError):
    """Requested cutoff rank falls outside the decision interval."""


class InadequateRanking(RtsError):
    """Ranking was judged inadequate; cutoff requires an explicit override."""


class NoFaults(RtsError):
    """Fault matrix is empty; the detection metric is undefined."""


class IllegalTransition(RtsError):
    """Workflow event is not legal in the session's current state."""

    def __init__(self, state: str, event: str):
        super().__init__(f"event '{event}' is not legal in state '{state}'")
        self.state = state
        self.event = event


class PayloadInvalid(RtsError):
    """Event or request payload is structurally invalid."""


class PayloadTooLarge(RtsError):
    """Request body exceeds the configured size limit."""


class NotFound(RtsError):
    """Requested entity does not exist in the store."""


class StoreCorrupt(RtsError):
    """Persisted session fails its integrity check (audit digest mismatch)."""


class ConcurrentWrite(RtsError):
    """Another writer holds the exclusive claim on this session."""
