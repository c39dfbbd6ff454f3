"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class FuseLensError(Exception):
    exit_code = 1


class InputError(FuseLensError, ValueError):
    """Bad input: unreadable image, invalid parameters, malformed manifest."""

    exit_code = 2


class ShapeError(InputError):
    """Images that must share a shape do not."""


class DimensionError(InputError):
    """A patch or filter window does not fit inside the image."""


class OutputError(FuseLensError):
    exit_code = 3


class DivergenceError(FuseLensError, ArithmeticError):
    """Non-finite loss or gradient during optimization."""

    exit_code = 4

    def __init__(self, iteration, message="non-finite loss or gradient"):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration
