"""Exception types shared across the package."""


class LoopscopeError(Exception):
    """Base class for all loopscope errors."""


class SpecError(LoopscopeError):
    """A machine spec failed to parse or validate.

    ``position`` is a (line, column) pair when the error came from the
    JSON layer, otherwise None.
    """

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at line {position[0]}, column {position[1]})"
        super().__init__(message)


class ExprError(SpecError):
    """Expression failed to parse or type-check."""


class DomainError(LoopscopeError):
    """A value fell outside its declared domain."""


class ReplayError(LoopscopeError):
    """Trace replay was attempted against a different spec version."""


class SessionError(LoopscopeError):
    """Protocol violation or bad state transition in a live session."""


class ScenarioError(LoopscopeError):
    """Unknown scenario id or malformed scenario payload."""


class InjectionError(LoopscopeError):
    """A fault injection did not validate or cannot wrap its target."""
