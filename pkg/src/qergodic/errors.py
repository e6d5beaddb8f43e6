"""Exception types raised across the package."""


class QergodicError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateInputError(QergodicError, ValueError):
    """Input is too small or empty for the requested operation."""


class DimensionMismatchError(QergodicError, ValueError):
    pass


class PreconditionError(QergodicError, ValueError):
    """A mathematical precondition (e.g. no resonances) does not hold."""


class SamplingError(QergodicError, RuntimeError):
    """Rejection sampling ran out of retries."""


class InvalidDensityError(QergodicError, ValueError):
    pass


class ConfigError(QergodicError, ValueError):
    """Experiment configuration failed validation.

    ``errors`` holds one ``"field.path: message"`` string per problem.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
