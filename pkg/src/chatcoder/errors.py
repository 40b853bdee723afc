"""Exception hierarchy shared across the package."""


class ChatCoderError(Exception):
    """Base class for all errors raised by this package."""


class ParseFailure(ChatCoderError):
    """A model reply could not be parsed into the expected structure."""


class UnsupportedMode(ChatCoderError):
    """The requested operation does not exist for the session's mode."""


class InvalidState(ChatCoderError):
    """An operation was attempted outside its legal session state."""


class UnknownAngle(ChatCoderError):
    """An edit referenced an angle name that is not one of the six."""


class UnaddressedQuestions(ChatCoderError):
    """Question resolution left at least one open item without an action."""


class LoopbackBudgetExceeded(ChatCoderError):
    """A loop-back was requested beyond the configured budget."""


class PrefixViolation(ChatCoderError):
    """A final requirement does not start with the original requirement."""


class InvalidConfig(ChatCoderError):
    """A model configuration is unusable (bad provider, missing cassette)."""


class ReplayMiss(ChatCoderError):
    """Strict replay found no recorded reply for a request fingerprint."""

    def __init__(self, fingerprint: str):
        super().__init__(f"no recorded reply for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class ProviderError(ChatCoderError):
    """The live provider failed after exhausting the retry budget."""


class ProviderTimeout(ProviderError):
    """The live provider did not answer within the configured timeout."""


class MalformedRecord(ChatCoderError):
    """A dataset file contains a record that cannot be decoded."""


class MissingField(MalformedRecord):
    """A dataset record lacks a required field."""


class InsufficientPool(ChatCoderError):
    """The few-shot pool holds fewer usable tasks than requested."""


class SandboxSetupError(ChatCoderError):
    """The sandbox itself could not be prepared (not a candidate failure)."""


class DomainError(ChatCoderError):
    """A numeric argument violated its documented range."""
