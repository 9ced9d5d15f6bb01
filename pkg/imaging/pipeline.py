"""
imaging.pipeline
~~~~~~~~~~~~~~~~

Lung-parenchyma extraction pipelines.

Threshold route: Otsu threshold -> binarize -> clear border components ->
area opening (noise pass) -> hole fill -> area opening (second pass).
K-means route: normalize -> K-means lung class -> clear border ->
erosion then dilation -> hole fill -> area opening.
The resulting mask is applied to the slice with a pixel-wise AND.
"""

import logging

import numpy as np

from .clustering import kmeans_segment
from .morphology import (MorphOp, area_open, clear_border_components,
                         fill_holes, morph)
from .slices import (BinaryMask, CtSlice, SegmentationConfig,
                     ShapeMismatchError)
from .threshold import binarize, class_means, otsu_threshold

log = logging.getLogger(__name__)


def segment_lung(image: CtSlice, cfg: SegmentationConfig) -> BinaryMask:
    """Extract the lung-parenchyma mask with the Otsu threshold route.

    A slice without dark tissue (Otsu class means closer than
    ``cfg.min_contrast``) gives an empty mask.

    Raises:
        DegenerateHistogramError: propagated from the Otsu step.
    """
    t = otsu_threshold(image)
    dark, bright = class_means(image, t)
    if bright - dark < cfg.min_contrast:
        log.info("No lung contrast in %r: class means %.1f and %.1f", image.source_id, dark, bright)
        return BinaryMask(np.zeros(image.shape, dtype=bool))
    mask = binarize(image, t)
    if cfg.border_clear:
        mask = clear_border_components(mask)
    mask = area_open(mask, cfg.min_area_px)
    mask = fill_holes(mask)
    mask = area_open(mask, cfg.second_min_area_px)
    log.info("Segmented %r: t=%d, lung area=%d px", image.source_id, t, mask.area)
    return mask


def _normalized(image: CtSlice) -> CtSlice:
    pixels = image.pixels.astype(np.float64)
    std = pixels.std()
    if std > 0:
        pixels = (pixels - pixels.mean()) / std
    return CtSlice(pixels=pixels, spacing_mm=image.spacing_mm, source_id=image.source_id)


def segment_lung_kmeans(image: CtSlice, cfg: SegmentationConfig) -> BinaryMask:
    """Extract the lung-parenchyma mask with the K-means route.

    Raises:
        DegenerateHistogramError: if the slice has fewer than ``cfg.kmeans_k`` levels.
    """
    mask = kmeans_segment(_normalized(image), cfg.kmeans_k, cfg.kmeans_seed)
    if cfg.border_clear:
        mask = clear_border_components(mask)
    mask = morph(mask, MorphOp.ERODE, cfg.morph_radius_px)
    mask = morph(mask, MorphOp.DILATE, cfg.morph_radius_px)
    mask = fill_holes(mask)
    mask = area_open(mask, cfg.second_min_area_px)
    log.info("K-means segmented %r: lung area=%d px", image.source_id, mask.area)
    return mask


def apply_mask(image: CtSlice, mask: BinaryMask) -> CtSlice:
    """Keep pixels under the mask and zero the rest.

    Raises:
        ShapeMismatchError: if the mask shape differs from the slice shape.
    """
    if mask.shape != image.shape:
        raise ShapeMismatchError(image.shape, mask.shape)
    pixels = np.where(mask.bits, image.pixels, np.zeros((), dtype=image.pixels.dtype))
    return CtSlice(pixels=pixels, spacing_mm=image.spacing_mm, source_id=image.source_id)
