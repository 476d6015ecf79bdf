class OrdstatError(Exception):
    """
    Base class for every error raised by this package.
    """


class InputValidationError(OrdstatError):
    """
    Raised when an input violates a documented precondition. Maps to CLI exit code 1.
    """


class ComputationError(OrdstatError):
    """
    Raised when a computation cannot be completed. Maps to CLI exit code 2.
    """
