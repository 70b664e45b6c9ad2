"""Exception types shared across the toolkit."""


class InvalidInputError(ValueError):
    """An argument violates a precondition (bad shape, range, or non-finite data)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a usable result.

    Carries an optional ``residual`` describing how far the computation was
    from its target when it gave up.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RankDeficiencyError(NumericalError):
    """Factorization input was numerically rank deficient."""


class DivergenceError(NumericalError):
    """An iterative solver produced a non-finite iterate.

    ``iteration`` is the 1-based iteration at which divergence was detected.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ConfigError(ValueError):
    """An experiment configuration file is missing, malformed, or invalid."""
