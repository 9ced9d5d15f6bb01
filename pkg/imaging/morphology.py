"""
imaging.morphology
~~~~~~~~~~~~~~~~~~

Binary morphology on masks: area opening, border clearing, erosion,
dilation and hole filling. Components are 8-connected; erosion and
dilation use a disk structuring element.
"""

import logging
from enum import Enum

import numpy as np
from scipy import ndimage as ndi

from .slices import BinaryMask

log = logging.getLogger(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class MorphOp(Enum):
    """Elementary binary morphology operations."""

    ERODE = "erode"
    DILATE = "dilate"


def disk_footprint(radius: int) -> np.ndarray:
    """Circular footprint of shape (2r+1, 2r+1); radius 1 gives a 4-connected cross."""
    y, x = np.ogrid[-radius : radius + 1, -radius : radius + 1]
    return x * x + y * y <= radius * radius


def _label(bits: np.ndarray):
    return ndi.label(bits, structure=EIGHT_CONNECTED)


def area_open(mask: BinaryMask, min_area_px: int) -> BinaryMask:
    """Remove every 8-connected component with fewer than ``min_area_px`` pixels."""
    if min_area_px < 1:
        raise ValueError(f"min_area_px must be >= 1, got {min_area_px}")
    if min_area_px == 1:
        return BinaryMask(mask.bits.copy())

    labels, n = _label(mask.bits)
    if n == 0:
        return BinaryMask(mask.bits.copy())
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_area_px
    keep[0] = False
    log.debug(
        "Area opening at %d px: kept %d of %d components",
        min_area_px,
        int(keep.sum()),
        n,
    )
    return BinaryMask(keep[labels])


def clear_border_components(mask: BinaryMask) -> BinaryMask:
    """Remove every component touching an image edge."""
    labels, n = _label(mask.bits)
    if n == 0:
        return BinaryMask(mask.bits.copy())
    edge = np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])
    touching = np.unique(edge[edge > 0])
    keep = np.ones(n + 1, dtype=bool)
    keep[0] = False
    keep[touching] = False
    log.debug("Cleared %d border components", len(touching))
    return BinaryMask(keep[labels])


def morph(mask: BinaryMask, op: MorphOp, radius_px: int) -> BinaryMask:
    """Erode or dilate with a disk of ``radius_px``.

    Pixels outside the grid count as foreground for erosion and as
    background for dilation, so ``erode(~m) == ~dilate(m)`` holds exactly.
    """
    op = MorphOp(op)
    if radius_px < 0:
        raise ValueError(f"radius_px must be >= 0, got {radius_px}")
    if radius_px == 0:
        return BinaryMask(mask.bits.copy())

    footprint = disk_footprint(radius_px)
    if op is MorphOp.ERODE:
        bits = ndi.binary_erosion(mask.bits, structure=footprint, border_value=1)
    else:
        bits = ndi.binary_dilation(mask.bits, structure=footprint, border_value=0)
    return BinaryMask(bits)


def fill_holes(mask: BinaryMask) -> BinaryMask:
    """Fill background regions not connected to the image border."""
    return BinaryMask(ndi.binary_fill_holes(mask.bits))
