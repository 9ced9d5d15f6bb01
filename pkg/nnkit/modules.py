"""
nnkit.modules
~~~~~~~~~~~~~

``torch.nn`` wrappers around :mod:`nnkit.functional` holding their own
parameters: the conv + BN + activation unit used everywhere, the batch
norm layer and the depthwise-separable pair.
"""

from typing import Union

import torch
from torch import nn

from .functional import (Activation, ConvSpec, act, batchnorm, conv2d,
                         depthwise_separable)


class BatchNorm(nn.BatchNorm2d):
    """``nn.BatchNorm2d`` routed through :func:`nnkit.functional.batchnorm`."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Batch statistics in training mode, running statistics in eval mode."""
        return batchnorm(
            x,
            self.weight,
            self.bias,
            self.running_mean,
            self.running_var,
            self.training,
            self.momentum,
            self.eps,
        )


class Conv(nn.Module):
    """Convolution, optional batch norm, activation.

    The convolution carries a bias only when there is no batch norm after it.
    """

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        kernel: int = 1,
        stride: int = 1,
        groups: int = 1,
        dilation: int = 1,
        activation: Union[Activation, str] = Activation.SILU,
        bn: bool = True,
    ) -> None:
        super().__init__()
        self.spec = ConvSpec(in_ch, out_ch, kernel, stride, dilation, groups, has_bn=bn)
        self.conv = nn.Conv2d(
            in_ch,
            out_ch,
            kernel,
            stride=stride,
            padding=self.spec.padding,
            dilation=dilation,
            groups=groups,
            bias=not bn,
        )
        self.bn = BatchNorm(out_ch) if bn else None
        self.activation = Activation(activation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Convolution, then batch norm if enabled, then the activation."""
        y = conv2d(x, self.spec, self.conv.weight, self.conv.bias)
        if self.bn is not None:
            y = self.bn(y)
        return act(y, self.activation)


class DepthwiseSeparable(nn.Module):
    """Depthwise k x k convolution followed by a pointwise 1x1 convolution.

    With ``bn=False`` the two convolutions run back to back through
    :func:`nnkit.functional.depthwise_separable`; otherwise each stage is a
    :class:`Conv` with its own batch norm.
    """

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        kernel: int = 3,
        stride: int = 1,
        activation: Union[Activation, str] = Activation.SILU,
        bn: bool = True,
    ) -> None:
        super().__init__()
        self.dw = Conv(in_ch, in_ch, kernel, stride, groups=in_ch, activation=Activation.IDENTITY, bn=bn)
        self.pw = Conv(in_ch, out_ch, 1, activation=activation, bn=bn)
        self.bn = bn

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Depthwise conv, then pointwise conv."""
        if self.bn:
            return self.pw(self.dw(x))
        y = depthwise_separable(
            x,
            self.dw.spec,
            self.pw.spec,
            self.dw.conv.weight,
            self.pw.conv.weight,
            self.dw.conv.bias,
            self.pw.conv.bias,
        )
        return act(y, self.pw.activation)
