"""
cli.gradsuite
~~~~~~~~~~~~~

Registry of the differentiable blocks checked by ``cployo gradcheck``.

Each entry builds a small freshly initialized block and names the input
shape it is checked with. Blocks taking a pyramid or producing raw maps
are wrapped so they map one tensor to tensors.
"""

import logging
from dataclasses import dataclass
from typing import Callable, ClassVar, Dict, List, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from attention import CBAM, PixelSpatialAttention
from backbone import C2fRepViTCAMF, RepViTCAMFUnit
from kanlayer import KanBottleneck, KanLayer
from neckhead import DetectionHead, MscafNeck, assign_targets, detection_loss
from nnkit import BatchNorm, Conv, GradientToleranceError, grad_check

log = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-3
DEFAULT_SEEDS = (0, 1, 2)

LOSS_IMAGE_SIZE = 64
LOSS_BOXES = ((10.0, 12.0, 30.0, 28.0), (36.0, 30.0, 60.0, 62.0))


def _pyramid(x: torch.Tensor, names: Sequence[str]) -> Dict[str, torch.Tensor]:
    return {name: x if i == 0 else F.avg_pool2d(x, 2 ** i) for i, name in enumerate(names)}


class NeckOnMap(nn.Module):
    """Neck as a function of one map, pooled into the three pyramid levels."""

    def __init__(self, neck: MscafNeck) -> None:
        super().__init__()
        self.neck = neck

    def forward(self, x: torch.Tensor) -> Dict[str, torch.Tensor]:
        """Neck outputs for a pyramid built from ``x``."""
        return self.neck(_pyramid(x, ("P3", "P4", "P5")))


class HeadOnMap(nn.Module):
    """Detection head as a function of one map, pooled into the three neck levels."""

    def __init__(self, head: DetectionHead) -> None:
        super().__init__()
        self.head = head

    def forward(self, x: torch.Tensor) -> Dict[int, torch.Tensor]:
        """Raw head maps for a pyramid built from ``x``."""
        return self.head(_pyramid(x, ("N3", "N4", "N5")))


class LossOnMap(nn.Module):
    """Total detection loss as a function of the stride-8 map."""

    def __init__(self) -> None:
        super().__init__()
        shapes = {s: (LOSS_IMAGE_SIZE // s,) * 2 for s in (8, 16, 32)}
        gt = [torch.tensor(LOSS_BOXES, dtype=torch.float64)]
        self.targets = assign_targets(gt, shapes, (LOSS_IMAGE_SIZE,) * 2, dtype=torch.float64)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Total loss of the raw maps pooled from ``x`` against the fixed targets."""
        raw = {8: x, 16: F.avg_pool2d(x, 2), 32: F.avg_pool2d(x, 4)}
        return detection_loss(raw, self.targets, exact_gradients=True).total


def _eval_batchnorm() -> nn.Module:
    bn = BatchNorm(4)
    with torch.no_grad():
        bn.running_mean.uniform_(-1, 1)
        bn.running_var.uniform_(0.5, 2)
    return bn.eval()


@dataclass(frozen=True)
class GradCase:
    """One block of the suite: a builder, its input shape and element sampling."""

    build: Callable[[], nn.Module]
    input_shape: Tuple[int, ...]
    samples_per_tensor: Optional[int] = None


class GradSuiteFactory:
    """Named gradient-check cases, in the order they are reported."""

    _cases_map: ClassVar[Dict[str, GradCase]] = {
        "conv": GradCase(lambda: Conv(4, 4, kernel=3), (2, 4, 6, 6)),
        "bn": GradCase(_eval_batchnorm, (2, 4, 4, 4)),
        "cbam": GradCase(lambda: CBAM(8, reduction=4), (2, 8, 5, 5)),
        "psa": GradCase(lambda: PixelSpatialAttention(4), (2, 4, 6, 6)),
        "kan_layer": GradCase(lambda: KanLayer(3, 2), (6, 3)),
        "kan_bottleneck": GradCase(lambda: KanBottleneck(8), (2, 8, 4, 4)),
        "repvit_camf_unit": GradCase(lambda: RepViTCAMFUnit(4), (2, 4, 6, 6), 8),
        "c2f": GradCase(lambda: C2fRepViTCAMF(8, 8, 1), (1, 8, 8, 8), 6),
        "neck": GradCase(lambda: NeckOnMap(MscafNeck({"P3": 8, "P4": 8, "P5": 8}, reduction=4)), (2, 8, 8, 8), 2),
        "head": GradCase(lambda: HeadOnMap(DetectionHead({"N3": 8, "N4": 8, "N5": 8})), (2, 8, 8, 8), 3),
        "loss": GradCase(LossOnMap, (1, 6, 8, 8)),
    }

    @classmethod
    def names(cls) -> List[str]:
        """Registered block names, in report order."""
        return list(cls._cases_map)

    @classmethod
    def get_case(cls, name: str) -> GradCase:
        """
        Raises:
            KeyError: If no block is registered under ``name``
        """
        return cls._cases_map[name]


def check_block(name: str, seeds: Sequence[int] = DEFAULT_SEEDS) -> Dict[str, float]:
    """Max relative error of one block over freshly seeded inits and inputs."""
    case = GradSuiteFactory.get_case(name)
    errors = []
    for seed in seeds:
        torch.manual_seed(seed)
        block = case.build()
        errors.append(grad_check(block, case.input_shape, seed=seed, samples_per_tensor=case.samples_per_tensor))
    worst = max(errors)
    log.info("gradcheck %s: max relative error %.3e over %d seeds", name, worst, len(seeds))
    return {"block": name, "max_rel_error": worst, "seeds": len(seeds)}


def run_suite(
    names: Sequence[str], seeds: Sequence[int] = DEFAULT_SEEDS, tolerance: float = DEFAULT_TOLERANCE
) -> List[Dict[str, float]]:
    """Check every named block, then fail on the worst one at or above ``tolerance``.

    Raises:
        GradientToleranceError: carrying the worst block's error.
    """
    rows = [check_block(name, seeds) for name in names]
    worst = max(rows, key=lambda r: r["max_rel_error"], default=None)
    if worst is not None and worst["max_rel_error"] >= tolerance:
        raise GradientToleranceError(worst["block"], worst["max_rel_error"], tolerance)
    return rows
