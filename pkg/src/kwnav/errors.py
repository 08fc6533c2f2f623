"""Exception hierarchy shared by all modules.

The CLI maps ``InputError`` to exit status 2 and ``NumericalError`` to 3.
"""


class KwnavError(Exception):
    pass


class InputError(KwnavError, ValueError):
    """Malformed or inconsistent input (bad frames, counts, files)."""


class NumericalError(KwnavError, ArithmeticError):
    """Degenerate or ill-conditioned data."""


class FrameError(InputError):
    """Two transforms were chained across mismatched frames."""


class InsufficientDataError(InputError):
    pass


class DegenerateError(NumericalError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class AmbiguityError(NumericalError):
    pass


class TrackingFailure(NumericalError):
    """Too few marker matches to estimate a pose; navigation should suspend."""


class OrderingError(InputError):
    pass


class NoIntersectionError(NumericalError):
    """Line (nearly) parallel to an indicator plane."""
