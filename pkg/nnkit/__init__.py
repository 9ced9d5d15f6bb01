"""
nnkit
~~~~~

Differentiable building blocks (convolution, batch norm, activations,
pooling) and the finite-difference gradient checker.
"""

from .exceptions import (ConvSpecError, GradientToleranceError,
                         InsufficientStatisticsError, NonFiniteGradientError,
                         ShapeMismatchError)
from .functional import (Activation, ConvSpec, PoolKind, act, batchnorm,
                         conv2d, depthwise_separable, pool)
from .gradcheck import grad_check, relative_error
from .modules import BatchNorm, Conv, DepthwiseSeparable

__all__ = [
    "Activation",
    "BatchNorm",
    "Conv",
    "ConvSpec",
    "ConvSpecError",
    "DepthwiseSeparable",
    "GradientToleranceError",
    "InsufficientStatisticsError",
    "NonFiniteGradientError",
    "PoolKind",
    "ShapeMismatchError",
    "act",
    "batchnorm",
    "conv2d",
    "depthwise_separable",
    "grad_check",
    "pool",
    "relative_error",
]
