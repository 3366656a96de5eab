# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black


class SubstructuringError(Exception):
    """Base class for every error raised by PySubstructuring."""


class InvalidArgumentError(SubstructuringError, ValueError):
    """Raised for invalid lengths, counts, mismatched grids or bad indices."""


class CoefficientError(InvalidArgumentError):
    """Raised when the diffusion coefficient drops below its lower bound."""


class ContractError(InvalidArgumentError):
    """Raised when an operator does not satisfy the contract of a routine."""


class SizeError(InvalidArgumentError):
    """Raised when a dense facility is asked for a grid above its size cap."""


class DecompositionError(InvalidArgumentError):
    pass


class AlignmentError(DecompositionError):
    pass


class DegenerateDecompositionError(DecompositionError):
    pass


class OverlapCollisionError(DecompositionError):
    pass


class UnsupportedDecompositionError(DecompositionError):
    pass


class ConfigError(InvalidArgumentError):
    """Raised for invalid experiment configuration."""


class NumericalError(SubstructuringError, RuntimeError):
    pass


class NoConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NumericalFailure(NumericalError):
    """Raised by the harness when a step fails or produces non-finite values."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step
