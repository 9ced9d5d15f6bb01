"""
backbone.c2f
~~~~~~~~~~~~

C2f blocks: a 1x1 expansion split into two halves, a chain of units on
the second half whose every output is kept, and a 1x1 squeeze over the
concatenation.

:class:`C2fRepViTCAMF` chains RepViT + CAMF units; :class:`C2f` chains
plain residual bottlenecks and stands in when the RepViT-CAMF ablation
flag is off.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Tuple

import torch
from torch import nn

from attention.cbam import DESK_REDUCTION
from cployo.errors import DataError
from nnkit import Conv

from .camf import MSC_KERNELS, ContextFusion, MultiScaleContext
from .repvit import RepVitBlock


class OddChannelError(DataError):
    """Raised when a C2f block is asked for an odd channel count."""

    def __init__(self, channels: int) -> None:
        self.channels = channels
        super().__init__(f"C2f blocks need an even channel count, got {channels}")


@dataclass(frozen=True)
class BlockConfig:
    """Wiring of one C2f RepViT-CAMF block."""

    channels: int
    n_bottlenecks: int = 1
    split_ratio: float = 0.5
    msc_kernels: Tuple[int, ...] = MSC_KERNELS
    use_camf: bool = True
    reduction: int = DESK_REDUCTION

    def __post_init__(self) -> None:
        if self.channels % 2:
            raise OddChannelError(self.channels)
        if self.split_ratio != 0.5:
            raise DataError(f"only an even split is supported, got {self.split_ratio}")


class Bottleneck(nn.Module):
    """Two 3x3 conv + BN + SiLU with a shortcut."""

    def __init__(self, channels: int, shortcut: bool = True) -> None:
        super().__init__()
        self.cv1 = Conv(channels, channels, 3)
        self.cv2 = Conv(channels, channels, 3)
        self.shortcut = shortcut

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Shortcut around two 3x3 convolutions."""
        y = self.cv2(self.cv1(x))
        return x + y if self.shortcut else y


class RepViTCAMFUnit(nn.Module):
    """RepViT mixer -> multi-scale context -> context fusion, with a shortcut."""

    def __init__(
        self,
        channels: int,
        use_camf: bool = True,
        msc_kernels: Tuple[int, ...] = MSC_KERNELS,
        reduction: int = DESK_REDUCTION,
        shortcut: bool = True,
    ) -> None:
        super().__init__()
        self.repvit = RepVitBlock(channels)
        self.context = MultiScaleContext(channels, msc_kernels) if use_camf else None
        self.fusion = ContextFusion(channels, reduction) if use_camf else None
        self.shortcut = shortcut

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Mixer, then context capture and fusion when enabled, plus the shortcut."""
        y = self.repvit(x)
        if self.context is not None:
            y = self.fusion(self.context(y))
        return x + y if self.shortcut else y


class BaseAbstractC2f(nn.Module, ABC):
    """
    Template for the split / chain / concat / squeeze wiring.

    Subclasses provide the unit chained on the second half through
    :meth:`make_unit`.
    """

    def __init__(self, in_ch: int, out_ch: int, n: int = 1, **unit_options: Any) -> None:
        super().__init__()
        if out_ch % 2:
            raise OddChannelError(out_ch)
        self.hidden = out_ch // 2
        self.unit_options = unit_options
        self.expand = Conv(in_ch, 2 * self.hidden, 1)
        self.units = nn.ModuleList(self.make_unit(self.hidden) for _ in range(n))
        self.squeeze = Conv((2 + n) * self.hidden, out_ch, 1)

    @abstractmethod
    def make_unit(self, channels: int) -> nn.Module:
        """Build one unit chained on the second half."""
        pass

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Expand, split in two, chain the units on the second half, concat and squeeze."""
        parts = list(self.expand(x).chunk(2, dim=1))
        for unit in self.units:
            parts.append(unit(parts[-1]))
        return self.squeeze(torch.cat(parts, dim=1))


class C2f(BaseAbstractC2f):
    """C2f with the plain conv bottleneck, used when RepViT-CAMF is switched off."""

    def make_unit(self, channels: int) -> nn.Module:
        return Bottleneck(channels, **self.unit_options)


class C2fRepViTCAMF(BaseAbstractC2f):
    """C2f whose chained units are RepViT-CAMF units."""

    def make_unit(self, channels: int) -> nn.Module:
        return RepViTCAMFUnit(channels, **self.unit_options)

    @classmethod
    def from_config(cls, cfg: BlockConfig, in_ch: int = 0) -> "C2fRepViTCAMF":
        """Build a block from its :class:`BlockConfig`; ``in_ch`` defaults to the config width."""
        return cls(
            in_ch or cfg.channels,
            cfg.channels,
            cfg.n_bottlenecks,
            use_camf=cfg.use_camf,
            msc_kernels=cfg.msc_kernels,
            reduction=cfg.reduction,
        )


def c2f_repvitcamf_forward(x: torch.Tensor, block: C2fRepViTCAMF) -> torch.Tensor:
    """Run one C2f RepViT-CAMF block on ``x``; the shape is preserved."""
    return block(x)
