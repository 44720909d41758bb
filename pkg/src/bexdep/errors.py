class BexdepError(Exception):
    """Base class for errors raised by this package."""


class InputError(BexdepError, ValueError):
    """Invalid data, configuration or precondition violation."""


class RankError(InputError):
    """Requested truncation exceeds the numerical rank of the data."""

    def __init__(self, message, attainable):
        super().__init__(message)
        self.attainable = attainable
