"""Exception hierarchy shared by all modules."""


class SteinerError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(SteinerError, ValueError):
    """Input data or parameters violate a precondition."""


class InvalidSpecError(InvalidInputError):
    """A box specification is malformed or not Gaussian bounded."""


class InconsistentSequenceError(InvalidInputError):
    """A volume sequence has a zero followed by a positive entry."""


class WindowError(InvalidInputError):
    """A fit window is out of range or too short."""


class NonConvergenceError(SteinerError, ArithmeticError):
    """An iterative numerical method did not converge.

    ``partial`` carries whatever the method had computed when it stopped.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
