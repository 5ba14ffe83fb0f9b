"""Exception types shared across the agent pipeline."""

from __future__ import annotations


class PFAgentError(Exception):
    """Base class for all agent-raised errors."""


# --- intent ---------------------------------------------------------------

class AmbiguousCase(PFAgentError):
    """Both an uploaded file and a different built-in alias appear in one turn.

    Surfaced to the user instead of guessing: case confusion is the most
    common grounding failure and must not be resolved heuristically.
    """


class MalformedParam(PFAgentError):
    """A marker phrase matched but its numeric argument failed to parse."""

    def __init__(self, message: str, span: tuple[int, int]):
        super().__init__(message)
        self.span = span


# --- backend --------------------------------------------------------------

class CaseLoadFailure(PFAgentError):
    """The simulation backend could not load the requested case."""


class WorkflowOrderError(PFAgentError):
    """A modification was attempted in the wrong phase of the case workflow."""


class UnknownDevice(PFAgentError):
    """A device identifier does not exist in the active case."""


# --- knowledge ------------------------------------------------------------

class EmptyManual(PFAgentError):
    """Manual indexing was requested with no pages."""


class BudgetExhausted(PFAgentError):
    """Mandatory prompt sections alone exceed the prompt budget."""


# --- execution ------------------------------------------------------------

class GateUnsupported(PFAgentError):
    """The parsed objective falls outside the template library."""


class ProviderError(PFAgentError):
    """The completion provider failed (network, auth, or malformed reply)."""


class EmptyResponse(PFAgentError):
    """The completion provider returned no usable content."""


class SandboxTimeout(PFAgentError):
    """Script execution exceeded the wall-time limit."""


class MemoryExceeded(PFAgentError):
    """Script execution exceeded the memory limit."""


class AttemptsExhausted(PFAgentError):
    """All generation attempts failed static validation."""

    def __init__(self, message: str, reports: list):
        super().__init__(message)
        self.reports = reports


# --- reporting / evolution ------------------------------------------------

class PersistenceFailure(PFAgentError):
    """A log or profile write failed; the session continues in memory."""


class CorruptProfile(PFAgentError):
    """The evolution profile on disk could not be parsed."""


class UnknownPack(PFAgentError):
    """A failure signature links a constraint pack missing from the registry."""


class OracleNonConvergence(PFAgentError):
    """The verification oracle's power flow did not converge."""
