"""Exception types raised by the persuade package."""


class PersuadeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(PersuadeError, ValueError):
    """Vectors or matrices with incompatible state-space dimensions."""


class InvalidArgumentError(PersuadeError, ValueError):
    """An argument violates a documented precondition."""


class NoPreimageError(PersuadeError):
    """The drift map cannot be inverted (ratio is zero)."""


class OutOfSimplexError(PersuadeError):
    """A computed point leaves the probability simplex."""


class AmbiguousInvariantError(PersuadeError):
    """The chain has more than one stationary distribution."""


class NotBayesPlausibleError(PersuadeError, ValueError):
    """The mean of the proposed posterior distribution differs from the prior."""


class InvalidWeightsError(PersuadeError, ValueError):
    """Splitting weights are nonpositive or do not sum to one."""


class UndefinedPosteriorError(PersuadeError):
    """Bayes update conditioned on a zero-probability message."""


class NotApplicableError(PersuadeError):
    """The requested construction does not apply to this instance."""


class DivergenceError(PersuadeError):
    """An iterative construction exceeded its iteration cap."""


class ConfigError(PersuadeError, ValueError):
    """A configuration file failed to parse or validate."""
