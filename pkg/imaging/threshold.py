"""
imaging.threshold
~~~~~~~~~~~~~~~~~

Otsu threshold selection and binarization on the 8-bit quantization
of a slice.
"""

import logging
from fractions import Fraction
from typing import Tuple

import numpy as np

from .slices import BinaryMask, CtSlice, DegenerateHistogramError

log = logging.getLogger(__name__)

LEVELS = 256


def quantize_8bit(image: CtSlice) -> np.ndarray:
    """Map a slice onto the 0..255 histogram domain.

    uint8 pixels are used as is, as are integral values already inside
    [0, 255]. Anything else (16-bit raw, floating HU) is min-max rescaled
    and rounded.
    """
    pixels = image.pixels
    if pixels.dtype == np.uint8:
        return pixels

    lo, hi = float(pixels.min()), float(pixels.max())
    if lo >= 0 and hi <= LEVELS - 1 and np.all(np.equal(np.mod(pixels, 1), 0)):
        return pixels.astype(np.uint8)

    if hi == lo:
        return np.zeros(pixels.shape, dtype=np.uint8)
    scaled = (pixels.astype(np.float64) - lo) * ((LEVELS - 1) / (hi - lo))
    return np.rint(scaled).astype(np.uint8)


def otsu_threshold(image: CtSlice) -> int:
    """Return the Otsu threshold of the slice's 8-bit histogram.

    The threshold t maximizes the between-class variance
    ``w0(t) * w1(t) * (mu0(t) - mu1(t)) ** 2`` with class 0 = levels <= t.
    The criterion is evaluated in exact rational arithmetic over pixel
    counts, so the smallest maximizing t is returned without rounding
    ties.

    Raises:
        DegenerateHistogramError: if the slice has a single intensity level.
    """
    hist = np.bincount(quantize_8bit(image).ravel(), minlength=LEVELS)
    if np.count_nonzero(hist) < 2:
        raise DegenerateHistogramError(f"constant image {image.source_id!r}")

    counts = [int(c) for c in hist]
    total_n = sum(counts)
    total_s = sum(level * c for level, c in enumerate(counts))

    best_t = 0
    best_score = Fraction(-1)
    n0 = 0
    s0 = 0
    for t in range(LEVELS):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            score = Fraction(0)
        else:
            s1 = total_s - s0
            # N^2 * w0 * w1 * (mu0 - mu1)^2 = (s0*n1 - s1*n0)^2 / (n0*n1)
            score = Fraction((s0 * n1 - s1 * n0) ** 2, n0 * n1)
        if score > best_score:
            best_score = score
            best_t = t

    log.info("Otsu threshold for %r: t=%d", image.source_id, best_t)
    return best_t


def binarize(image: CtSlice, t: int) -> BinaryMask:
    """Mark pixels whose 8-bit level is <= t (lung tissue is dark)."""
    return BinaryMask(quantize_8bit(image) <= t)


def class_means(image: CtSlice, t: int) -> Tuple[float, float]:
    """Mean 8-bit level of the pixels <= t and of the pixels > t.

    An empty class has mean ``nan``.
    """
    levels = quantize_8bit(image).ravel().astype(np.float64)
    dark = levels <= t
    lower = float(levels[dark].mean()) if dark.any() else float("nan")
    upper = float(levels[~dark].mean()) if not dark.all() else float("nan")
    return lower, upper
