"""
nnkit.exceptions
~~~~~~~~~~~~~~~~

Errors raised by the differentiable building blocks and the gradient
checker.
"""

from cployo.errors import DataError, NumericError, ShapeMismatchError

__all__ = [
    "ConvSpecError",
    "GradientToleranceError",
    "InsufficientStatisticsError",
    "NonFiniteGradientError",
    "ShapeMismatchError",
]


class ConvSpecError(DataError):
    """Raised when a convolution specification is inconsistent."""

    pass


class InsufficientStatisticsError(DataError):
    """Raised when train-mode batch normalization sees one value per channel."""

    def __init__(self, n: int, h: int, w: int) -> None:
        super().__init__(f"insufficient statistics: N*H*W = {n}*{h}*{w} = 1 in train mode")


class NonFiniteGradientError(NumericError):
    """Raised when an analytic gradient contains NaN or infinity."""

    def __init__(self, tensor_name: str) -> None:
        self.tensor_name = tensor_name
        super().__init__(f"non-finite gradient for {tensor_name}")


class GradientToleranceError(NumericError):
    """Raised when a gradient check exceeds its tolerance."""

    def __init__(self, block_name: str, error: float, tolerance: float) -> None:
        self.block_name = block_name
        self.error = error
        self.tolerance = tolerance
        super().__init__(
            f"gradient check failed for {block_name}: "
            f"max relative error {error:.3e} >= {tolerance:.1e}"
        )
