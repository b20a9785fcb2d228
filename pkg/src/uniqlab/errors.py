"""Exception hierarchy for uniqlab."""


class UniqlabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(UniqlabError):
    pass


class EmptyInterior(UniqlabError):
    pass


class Disconnected(UniqlabError):
    pass


class NonFinite(UniqlabError):
    pass


class NotPositiveDefinite(UniqlabError):
    pass


class OriginOutside(UniqlabError):
    pass


class InsufficientData(UniqlabError):
    pass


class SolverFailure(UniqlabError):
    pass


class MaximumPrincipleViolated(UniqlabError):
    pass


class NegativeInput(UniqlabError):
    pass


class EmptySequence(UniqlabError):
    pass


class MissingSnapshots(UniqlabError):
    pass


class PositivityLost(UniqlabError):
    pass


class KappaZero(UniqlabError):
    pass


class UnknownScenario(UniqlabError):
    pass
