"""
neckhead.neck
~~~~~~~~~~~~~

The multi-scale fusion neck. Pyramid levels are projected laterally,
merged top-down (upsample, concatenate, project, refine) and then
bottom-up (strided conv, concatenate, project, refine). Each merge adds
its refinement to the lateral it lands on, so a neck whose fusion weights
are all zero passes the laterals through.

The refinement block is a KAN bottleneck, or a plain C2f block when that
ablation flag is off. CBAM gates the finest top-down output and the
coarsest bottom-up output unless the attention flag is off.
"""

import logging
from typing import Dict, Mapping, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from attention import CBAM, DESK_REDUCTION, fit_reduction
from backbone import C2f
from cployo.errors import DataError
from kanlayer import KanBottleneck
from nnkit import Conv

log = logging.getLogger(__name__)

INPUT_LEVELS = ("P3", "P4", "P5")
OUTPUT_LEVELS = ("N3", "N4", "N5")


class NeckScaleError(DataError):
    """Raised when the pyramid levels do not halve in size from P3 to P5."""


class FusionNode(nn.Module):
    """``lateral + refine(project(concat(others..., lateral)))``."""

    def __init__(self, in_channels: Sequence[int], out_ch: int, use_kan_bottleneck: bool = True) -> None:
        super().__init__()
        self.proj = Conv(sum(in_channels), out_ch, 1)
        if use_kan_bottleneck:
            self.block = KanBottleneck(out_ch, residual=False)
        else:
            self.block = C2f(out_ch, out_ch, 1, shortcut=False)

    def forward(self, lateral: torch.Tensor, *others: torch.Tensor) -> torch.Tensor:
        """Fuse ``others`` into ``lateral`` with a residual refinement."""
        return lateral + self.block(self.proj(torch.cat([*others, lateral], dim=1)))


class MscafNeck(nn.Module):
    """Top-down then bottom-up fusion of P3, P4 and P5, with CBAM on the N3 and N5 outputs."""

    def __init__(
        self,
        channels: Mapping[str, int],
        use_mscaf: bool = True,
        use_kan_bottleneck: bool = True,
        reduction: int = DESK_REDUCTION,
    ) -> None:
        super().__init__()
        c3, c4, c5 = (channels[level] for level in INPUT_LEVELS)
        self.in_channels = {"P3": c3, "P4": c4, "P5": c5}

        self.lat3 = Conv(c3, c3, 1)
        self.lat4 = Conv(c4, c4, 1)
        self.lat5 = Conv(c5, c5, 1)

        self.td4 = FusionNode((c5, c4), c4, use_kan_bottleneck)
        self.td3 = FusionNode((c4, c3), c3, use_kan_bottleneck)
        self.down3 = Conv(c3, c3, 3, stride=2)
        self.bu4 = FusionNode((c3, c4), c4, use_kan_bottleneck)
        self.down4 = Conv(c4, c4, 3, stride=2)
        self.bu5 = FusionNode((c4, c5), c5, use_kan_bottleneck)

        if use_mscaf:
            self.attn3 = CBAM(c3, fit_reduction(c3, reduction))
            self.attn5 = CBAM(c5, fit_reduction(c5, reduction))
        else:
            self.attn3 = nn.Identity()
            self.attn5 = nn.Identity()
        log.debug(
            "MscafNeck channels=%s mscaf=%s kan=%s", self.in_channels, use_mscaf, use_kan_bottleneck
        )

    @property
    def out_channels(self) -> Dict[str, int]:
        return dict(zip(OUTPUT_LEVELS, self.in_channels.values()))

    def check(self, features: Mapping[str, torch.Tensor]) -> None:
        """Check levels, channel counts and the halving of sizes.

        Raises:
            NeckScaleError: if the pyramid does not match the neck.
        """
        missing = [level for level in INPUT_LEVELS if level not in features]
        if missing:
            raise NeckScaleError(f"missing pyramid levels {missing}")
        for level in INPUT_LEVELS:
            got = features[level].shape[1]
            if got != self.in_channels[level]:
                raise NeckScaleError(
                    f"{level} has {got} channels, neck expects {self.in_channels[level]}"
                )
        sizes = [tuple(features[level].shape[2:]) for level in INPUT_LEVELS]
        for finer, coarser in zip(sizes, sizes[1:]):
            if finer != (2 * coarser[0], 2 * coarser[1]):
                raise NeckScaleError(f"pyramid sizes {sizes} do not halve level to level")

    def forward(self, features: Mapping[str, torch.Tensor]) -> Dict[str, torch.Tensor]:
        """Return ``{"N3", "N4", "N5"}`` at the input resolutions."""
        self.check(features)
        l3 = self.lat3(features["P3"])
        l4 = self.lat4(features["P4"])
        t5 = self.lat5(features["P5"])

        t4 = self.td4(l4, F.interpolate(t5, scale_factor=2.0, mode="nearest"))
        t3 = self.td3(l3, F.interpolate(t4, scale_factor=2.0, mode="nearest"))
        n3 = self.attn3(t3)

        n4 = self.bu4(t4, self.down3(n3))
        n5 = self.attn5(self.bu5(t5, self.down4(n4)))
        return {"N3": n3, "N4": n4, "N5": n5}


def neck_forward(features: Mapping[str, torch.Tensor], neck: MscafNeck) -> Dict[str, torch.Tensor]:
    """Run the neck on a P3/P4/P5 pyramid."""
    return neck(features)
