"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for all errors raised by latticelab."""


class SingularMatrix(LabError):
    pass


class RankDeficient(LabError):
    pass


class ZeroRank(LabError):
    pass


class NoComplement(LabError):
    pass


class NotCanonical(LabError):
    pass


class NotRogersAdmissible(LabError):
    pass


class DomainError(LabError, ValueError):
    pass


class NumericalFailure(LabError):
    pass


class NotOnManifold(LabError):
    pass


class ToleranceNotMet(LabError):
    """Raised when a numerical method cannot reach the requested accuracy.

    The best value obtained is kept on the exception so callers can still
    report it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(LabError):
    pass
