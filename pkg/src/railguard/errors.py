"""Exception hierarchy for railguard."""


class RailguardError(Exception):
    pass


class ValidationError(RailguardError, ValueError):
    """A structural or range invariant failed."""


class DuplicateId(ValidationError):
    pass


class DanglingEndpoint(ValidationError):
    pass


class NonPositiveLength(ValidationError):
    pass


class LoopTrack(ValidationError):
    pass


class PlatformConflict(ValidationError):
    pass


class OverlapConflict(ValidationError):
    pass


class UnknownAgent(RailguardError, KeyError):
    pass


class UnknownTrain(UnknownAgent):
    pass


class NegativeSpeed(RailguardError, ValueError):
    pass


class DisconnectedTracks(RailguardError):
    pass


class Unreachable(RailguardError):
    pass


class IncompleteScope(RailguardError, ValueError):
    pass


class MissingEdge(RailguardError, KeyError):
    pass


class InvalidGraph(RailguardError, ValueError):
    pass


class TooLarge(RailguardError, ValueError):
    pass


class NoRelayInRange(RailguardError):
    pass


class InfeasibleResolution(RailguardError):
    """No joint action keeps the pair above the critical distance.

    ``decisions`` carries the best-effort DecisionSet the caller should
    still apply.
    """

    def __init__(self, message, decisions=None):
        super().__init__(message)
        self.decisions = decisions


class ParseError(RailguardError, ValueError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class CountMismatch(RailguardError, ValueError):
    pass
