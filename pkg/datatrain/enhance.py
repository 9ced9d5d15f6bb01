"""
datatrain.enhance
~~~~~~~~~~~~~~~~~

Image enhancement hooks applied to every sample before it reaches the
detector. ``none`` leaves images untouched; ``lung_mask`` keeps only the
segmented lung parenchyma.
"""

import logging
from dataclasses import replace
from enum import Enum
from typing import Callable, ClassVar, Dict

from imaging import (CtSlice, DegenerateHistogramError, SegmentationConfig,
                     apply_mask, segment_lung)

from .dataset import NoduleDataset, Sample

log = logging.getLogger(__name__)

Enhancer = Callable[[Sample], Sample]


class EnhancementType(Enum):
    """Image enhancements applied before training and evaluation."""

    NONE = "none"
    LUNG_MASK = "lung_mask"


def identity(sample: Sample) -> Sample:
    """Return the sample unchanged."""
    return sample


def segment_lungs(sample: Sample) -> Sample:
    """Zero everything outside the lung mask; slices that cannot be thresholded pass through."""
    image = CtSlice(pixels=sample.pixels, source_id=sample.image_id)
    try:
        mask = segment_lung(image, SegmentationConfig.for_shape(*sample.pixels.shape))
    except DegenerateHistogramError:
        log.warning("Lung masking skipped for %s: flat image", sample.image_id)
        return sample
    return replace(sample, pixels=apply_mask(image, mask).pixels)


class EnhancerFactory:
    """Lookup of enhancement hooks by name."""

    _enhancers: ClassVar[Dict[EnhancementType, Enhancer]] = {
        EnhancementType.NONE: identity,
        EnhancementType.LUNG_MASK: segment_lungs,
    }

    @classmethod
    def get(cls, name: str) -> Enhancer:
        """
        Raises:
            ValueError: if ``name`` is not a known enhancement.
        """
        return cls._enhancers[EnhancementType(name)]


def enhance_dataset(dataset: NoduleDataset, name: str) -> NoduleDataset:
    """Apply the named enhancement to every sample.

    Raises:
        ValueError: if ``name`` is not a known enhancement.
    """
    enhancer = EnhancerFactory.get(name)
    if enhancer is identity:
        return dataset
    log.info("Applying %s enhancement to %d images", name, len(dataset))
    return NoduleDataset(dataset.root, [enhancer(s) for s in dataset], dataset.classes, dataset.size)
