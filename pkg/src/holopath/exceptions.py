"""Exception types raised by holopath.

Every error derives from :class:`HolopathError`, which is itself a
``ValueError`` so callers that only care about bad input can catch that.
"""


class HolopathError(ValueError):
    pass


class DegenerateGridError(HolopathError):
    pass


class InvalidPotentialError(HolopathError):
    pass


class AsymmetricOperatorError(HolopathError):
    pass


class NegativeTimeError(HolopathError):
    pass


class EmptyPathError(HolopathError):
    pass


class EmptyEnsembleError(HolopathError):
    pass


class NegativeActionError(HolopathError):
    pass


class ProbabilityRangeError(HolopathError):
    pass


class UnnormalizedStateError(HolopathError):
    pass


class NetworkSizeError(HolopathError):
    pass


class PartitionError(HolopathError):
    pass


class DimensionMismatchError(HolopathError):
    pass


class NotSuperselectedError(HolopathError):
    pass


class ConfigError(HolopathError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
