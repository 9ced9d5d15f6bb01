"""
imaging
~~~~~~~

CT-slice ingestion and lung-parenchyma segmentation.
"""

from .clustering import kmeans_segment
from .morphology import (MorphOp, area_open, clear_border_components,
                         disk_footprint, fill_holes, morph)
from .pipeline import apply_mask, segment_lung, segment_lung_kmeans
from .slices import (BinaryMask, CtSlice, DegenerateHistogramError,
                     ImagingError, InvalidSliceError, SegmentationConfig,
                     ShapeMismatchError, read_slice, write_mask, write_slice)
from .threshold import binarize, class_means, otsu_threshold, quantize_8bit

__all__ = [
    "BinaryMask",
    "CtSlice",
    "DegenerateHistogramError",
    "ImagingError",
    "InvalidSliceError",
    "MorphOp",
    "SegmentationConfig",
    "ShapeMismatchError",
    "apply_mask",
    "area_open",
    "binarize",
    "class_means",
    "clear_border_components",
    "disk_footprint",
    "fill_holes",
    "kmeans_segment",
    "morph",
    "otsu_threshold",
    "quantize_8bit",
    "read_slice",
    "segment_lung",
    "segment_lung_kmeans",
    "write_mask",
    "write_slice",
]
