"""
backbone.repvit
~~~~~~~~~~~~~~~

RepViT token mixer with structural reparameterization.

While training, the depthwise token mixer is a sum of parallel branches:
a 3x3 depthwise conv + BN, a 1x1 depthwise conv + BN and, at stride 1, a
BN-only identity branch. :func:`fuse_reparam` folds every BN into its
kernel, pads the 1x1 and identity kernels to 3x3 and sums the branches
into one depthwise 3x3 convolution that computes the same function in
eval mode.
"""

import logging
from enum import Enum
from typing import Tuple

import torch
import torch.nn.functional as F
from torch import nn

from cployo.errors import DataError
from nnkit import Activation, BatchNorm, Conv, ConvSpec, act, conv2d

log = logging.getLogger(__name__)


class MixerMode(str, Enum):
    """Whether a branch set still holds its branches or the single fused kernel."""

    TRAINING = "training"
    FUSED = "fused"


class AlreadyFusedError(DataError):
    """Raised when a branch set is fused a second time."""

    def __init__(self, name: str = "") -> None:
        suffix = f": {name}" if name else ""
        super().__init__(f"already fused{suffix}")


def fold_batchnorm(kernel: torch.Tensor, bn: BatchNorm) -> Tuple[torch.Tensor, torch.Tensor]:
    """Fold eval-mode BN into the preceding conv.

    w' = gamma * w / sqrt(var + eps), b' = beta - gamma * mean / sqrt(var + eps).
    """
    std = torch.sqrt(bn.running_var + bn.eps)
    scale = bn.weight / std
    return kernel * scale.view(-1, 1, 1, 1), bn.bias - bn.running_mean * scale


class RepVitBranchSet(nn.Module):
    """Parallel depthwise branches, or their single fused kernel."""

    def __init__(self, channels: int, stride: int = 1) -> None:
        super().__init__()
        self.channels = channels
        self.stride = stride
        self.dw3x3 = Conv(channels, channels, 3, stride, groups=channels, activation=Activation.IDENTITY)
        self.dw1x1 = Conv(channels, channels, 1, stride, groups=channels, activation=Activation.IDENTITY)
        self.identity_bn = BatchNorm(channels) if stride == 1 else None
        self.fused = None
        self.mode = MixerMode.TRAINING

    @property
    def fused_spec(self) -> ConvSpec:
        return ConvSpec.depthwise(self.channels, 3, self.stride)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Sum of the branches, or the fused depthwise conv."""
        if self.mode is MixerMode.FUSED:
            return conv2d(x, self.fused_spec, self.fused.weight, self.fused.bias)
        y = self.dw3x3(x) + self.dw1x1(x)
        if self.identity_bn is not None:
            y = y + self.identity_bn(x)
        return y

    @torch.no_grad()
    def equivalent_kernel(self) -> Tuple[torch.Tensor, torch.Tensor]:
        """The depthwise 3x3 kernel and bias equal to the eval-mode branch sum."""
        kernel, bias = fold_batchnorm(self.dw3x3.conv.weight, self.dw3x3.bn)
        k1, b1 = fold_batchnorm(self.dw1x1.conv.weight, self.dw1x1.bn)
        kernel = kernel + F.pad(k1, [1, 1, 1, 1])
        bias = bias + b1
        if self.identity_bn is not None:
            delta = torch.zeros_like(kernel)
            delta[:, 0, 1, 1] = 1.0
            kid, bid = fold_batchnorm(delta, self.identity_bn)
            kernel = kernel + kid
            bias = bias + bid
        return kernel, bias


def fuse_reparam(branches: RepVitBranchSet) -> RepVitBranchSet:
    """Collapse the branches into one depthwise 3x3 conv, in place.

    Raises:
        AlreadyFusedError: if the branch set is already fused.
    """
    if branches.mode is MixerMode.FUSED:
        raise AlreadyFusedError()
    kernel, bias = branches.equivalent_kernel()
    fused = nn.Conv2d(
        branches.channels,
        branches.channels,
        3,
        stride=branches.stride,
        padding=1,
        groups=branches.channels,
        bias=True,
    ).to(device=kernel.device, dtype=kernel.dtype)
    with torch.no_grad():
        fused.weight.copy_(kernel)
        fused.bias.copy_(bias)
    branches.fused = fused
    branches.dw3x3 = branches.dw1x1 = branches.identity_bn = None
    branches.mode = MixerMode.FUSED
    return branches


class RepVitBlock(nn.Module):
    """Token mixer (branch set) -> SiLU -> pointwise channel mixer (1x1 conv + BN + SiLU)."""

    def __init__(self, in_ch: int, out_ch: int = 0, stride: int = 1) -> None:
        super().__init__()
        self.branches = RepVitBranchSet(in_ch, stride)
        self.pointwise = Conv(in_ch, out_ch or in_ch, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Apply the mixer and the pointwise channel mixer."""
        return repvit_forward(x, self)


def repvit_forward(x: torch.Tensor, block: RepVitBlock) -> torch.Tensor:
    """Token mixer, SiLU, then the pointwise channel mixer."""
    return block.pointwise(act(block.branches(x), Activation.SILU))


def fuse_model(model: nn.Module) -> int:
    """Fuse every unfused branch set inside ``model``; returns how many were fused."""
    count = 0
    for name, module in model.named_modules():
        if isinstance(module, RepVitBranchSet) and module.mode is MixerMode.TRAINING:
            fuse_reparam(module)
            count += 1
            log.debug("Fused %s", name)
    log.info("Fused %d RepViT branch sets", count)
    return count


def is_fused(model: nn.Module) -> bool:
    """True when the model holds branch sets and all of them are fused."""
    sets = [m for m in model.modules() if isinstance(m, RepVitBranchSet)]
    return bool(sets) and all(m.mode is MixerMode.FUSED for m in sets)
