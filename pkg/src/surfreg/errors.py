"""Exception hierarchy shared across the package."""


class RegistrationError(Exception):
    """Base class for every error raised by surfreg."""


class InvalidInputError(RegistrationError, ValueError):
    """Bad shapes, counts, weights or other precondition violations."""


class SingularSystemError(RegistrationError, ArithmeticError):
    """The assembled linear system could not be solved to tolerance."""

    def __init__(self, message: str, condition_estimate: float = float("inf")):
        super().__init__(f"singular system: {message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate


class DegenerateNormalError(RegistrationError, ValueError):
    def __init__(self, index: int):
        super().__init__(f"degenerate normal neighborhood at point {index}")
        self.index = index


class ObjParseError(RegistrationError, ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
