"""Exception types shared across the package."""


class TriageError(Exception):
    """Base class for all citriage errors."""


# --- build store ---------------------------------------------------------


class MalformedFixture(TriageError):
    """Fixture file violates the documented schema."""


class NotFound(TriageError):
    """A referenced build does not exist in the store."""


# --- chain resolution -----------------------------------------------------


class InvalidGrammar(TriageError):
    """A marker grammar pattern does not compile or lacks required captures."""


class AmbiguousChain(TriageError):
    """More than one failed downstream marker at a single level."""


class DepthExceeded(TriageError):
    """Deterministic chain longer than the configured maximum depth."""


class EntryNotFailed(TriageError):
    """Triage entry build does not have Failure status."""


class HallucinatedChild(TriageError):
    """Finder reported a build absent from the store, twice at one level."""


class RoundsExceeded(TriageError):
    """Agentic resolution exceeded the configured round limit."""


class UnparseableReply(TriageError):
    """Finder reply matched neither a name+number report nor the sentinel."""


# --- preprocessing --------------------------------------------------------


class InvalidPattern(TriageError):
    """A configured regular expression does not compile."""


# --- knowledge ------------------------------------------------------------


class InconsistentCondition(TriageError):
    """Historical records supplied without the HR flag, or vice versa."""


# --- gateway --------------------------------------------------------------


class GatewayError(TriageError):
    """Chat backend failed (transport error, auth failure, retries exhausted)."""


class ScriptMiss(TriageError):
    """Scripted backend has no exchange matching the request."""


class InvalidToolCall(TriageError):
    """Reply called an undeclared tool or violated its parameter schema."""


class MissingSections(TriageError):
    """Triage reply lacks one of the two required answer sections."""


class RedactionViolation(TriageError):
    """A prompt's log block still matches a configured redaction rule."""


# --- engine ---------------------------------------------------------------


class TriageStageError(TriageError):
    """A triage pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


# --- evaluation harness ---------------------------------------------------


class EmptyInput(TriageError):
    """Statistics requested over an empty sequence."""


class ProfileMismatch(TriageError):
    """Corpus distribution profile is internally inconsistent."""


class IncompleteResults(TriageError):
    """Ablation report requested without results for all eight conditions."""
