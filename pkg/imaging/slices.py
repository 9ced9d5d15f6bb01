"""
imaging.slices
~~~~~~~~~~~~~~

Domain types for two-dimensional CT slices and binary masks, the
segmentation configuration, and PNG/PGM input/output.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import ClassVar, Optional, Tuple, Union

import numpy as np
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field

from cployo.errors import DataError, ShapeMismatchError

log = logging.getLogger(__name__)

MIN_SIDE_PX = 8


class ImagingError(DataError):
    """Base class for all imaging errors."""

    pass


class InvalidSliceError(ImagingError):
    """Raised when pixel data cannot represent a CT slice."""

    pass


class DegenerateHistogramError(ImagingError):
    """Raised when a histogram has fewer distinct levels than an operation needs."""

    def __init__(self, detail: str = "") -> None:
        message = "degenerate histogram"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


@dataclass(frozen=True)
class CtSlice:
    """A single grayscale CT slice.

    Attributes:
        pixels: H×W intensities (uint8, uint16 or floating HU).
        spacing_mm: optional physical (row, col) spacing.
        source_id: identifier of the originating file or generator.
    """

    pixels: np.ndarray
    spacing_mm: Optional[Tuple[float, float]] = None
    source_id: str = ""

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2:
            raise InvalidSliceError(
                f"CT slice must be 2-D, got {pixels.ndim} dimensions ({self.source_id})"
            )
        h, w = pixels.shape
        if h < MIN_SIDE_PX or w < MIN_SIDE_PX:
            raise InvalidSliceError(
                f"CT slice must be at least {MIN_SIDE_PX}x{MIN_SIDE_PX}, got {h}x{w}"
            )
        if not np.all(np.isfinite(pixels)):
            raise InvalidSliceError(f"CT slice {self.source_id!r} has non-finite pixels")
        object.__setattr__(self, "pixels", pixels)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class BinaryMask:
    """Boolean H×W mask; true marks lung parenchyma."""

    bits: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise InvalidSliceError(f"mask must be 2-D, got {bits.ndim} dimensions")
        object.__setattr__(self, "bits", bits.astype(bool, copy=False))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.bits.shape

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))

    def __invert__(self) -> "BinaryMask":
        return BinaryMask(~self.bits)

    def to_png_array(self) -> np.ndarray:
        """Mask as uint8 with values {0, 255}."""
        return np.where(self.bits, 255, 0).astype(np.uint8)


class SegmentationConfig(BaseModel):
    """Parameters of the lung-parenchyma pipelines.

    ``min_area_px`` drives the noise area-opening pass and
    ``second_min_area_px`` the final pass; :meth:`for_shape` scales the
    512×512 reference defaults to another slice size. A slice whose two
    Otsu class means lie closer than ``min_contrast`` 8-bit levels holds
    no lung and segments to an empty mask.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    min_area_px: int = Field(default=64, ge=1)
    second_min_area_px: int = Field(default=512, ge=1)
    kmeans_k: int = Field(default=2, ge=2)
    morph_radius_px: int = Field(default=1, ge=0)
    border_clear: bool = True
    min_contrast: int = Field(default=64, ge=0)
    kmeans_seed: int = 0

    REFERENCE_AREA_PX: ClassVar[int] = 512 * 512

    @classmethod
    def for_shape(cls, height: int, width: int, **overrides) -> "SegmentationConfig":
        """Build a config whose area thresholds scale with the slice area."""
        scale = (height * width) / cls.REFERENCE_AREA_PX
        defaults = {
            "min_area_px": max(1, round(cls.model_fields["min_area_px"].default * scale)),
            "second_min_area_px": max(
                1, round(cls.model_fields["second_min_area_px"].default * scale)
            ),
        }
        defaults.update(overrides)
        log.debug("Scaled segmentation defaults for %dx%d: %s", height, width, defaults)
        return cls(**defaults)


def read_slice(path: Union[str, Path], sidecar: Optional[Union[str, Path]] = None) -> CtSlice:
    """Read a PNG or PGM grayscale slice.

    When a JSON sidecar ``{"slope": s, "intercept": b}`` exists (explicit
    path, or the image path with a ``.json`` suffix) the pixels are
    rescaled to Hounsfield units as ``pixels * s + b``.

    Raises:
        InvalidSliceError: if the file is not a single-channel image.
    """
    path = Path(path)
    with Image.open(path) as img:
        if img.mode not in ("L", "I;16", "I;16B", "I;16L", "I", "F"):
            raise InvalidSliceError(f"{path} is not grayscale (mode {img.mode})")
        pixels = np.array(img)
    if pixels.dtype == np.int32 and pixels.min() >= 0 and pixels.max() <= np.iinfo(np.uint16).max:
        pixels = pixels.astype(np.uint16)
    log.debug("Read %s: shape=%s dtype=%s", path, pixels.shape, pixels.dtype)

    sidecar_path = Path(sidecar) if sidecar is not None else path.with_suffix(".json")
    if sidecar_path.exists():
        with open(sidecar_path, encoding="utf-8") as fh:
            rescale = json.load(fh)
        try:
            slope = float(rescale["slope"])
            intercept = float(rescale["intercept"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSliceError(f"malformed HU sidecar {sidecar_path}: {exc}") from exc
        pixels = pixels.astype(np.float64) * slope + intercept
        log.info("Applied HU rescale slope=%s intercept=%s to %s", slope, intercept, path)

    return CtSlice(pixels=pixels, source_id=path.stem)


def write_slice(image: CtSlice, path: Union[str, Path]) -> None:
    """Write an integer slice as PNG (uint8 or uint16)."""
    pixels = image.pixels
    if pixels.dtype not in (np.uint8, np.uint16):
        raise InvalidSliceError(f"cannot write {pixels.dtype} pixels as PNG")
    Image.fromarray(pixels).save(Path(path), format="PNG")


def write_mask(mask: BinaryMask, path: Union[str, Path]) -> None:
    """Write a mask as an 8-bit PNG with values {0, 255}."""
    Image.fromarray(mask.to_png_array()).save(Path(path), format="PNG")
