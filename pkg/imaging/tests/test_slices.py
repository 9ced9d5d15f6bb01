import json

import numpy as np
import pytest
from pydantic import ValidationError

from imaging.slices import (BinaryMask, CtSlice, InvalidSliceError,
                            SegmentationConfig, read_slice, write_mask,
                            write_slice)
from imaging.tests.factory import CtSliceFactory


class TestCtSlice:
    """Slice validation."""

    def test_rejects_3d(self):
        """Test that a 3-D array is rejected."""
        with pytest.raises(InvalidSliceError):
            CtSlice(pixels=np.zeros((8, 8, 3)))

    def test_rejects_tiny(self):
        """Test that a slice smaller than the minimum side is rejected."""
        with pytest.raises(InvalidSliceError):
            CtSlice(pixels=np.zeros((4, 16)))

    def test_rejects_nan(self):
        """Test that NaN pixels are rejected."""
        pixels = np.zeros((8, 8))
        pixels[1, 1] = np.nan
        with pytest.raises(InvalidSliceError):
            CtSlice(pixels=pixels)


class TestSegmentationConfig:
    """Segmentation config validation."""

    def test_unknown_field_rejected(self):
        """Test that an unknown field is rejected."""
        with pytest.raises(ValidationError):
            SegmentationConfig(min_area=3)

    def test_min_area_must_be_positive(self):
        """Test that a zero area limit is rejected."""
        with pytest.raises(ValidationError):
            SegmentationConfig(min_area_px=0)


class TestSliceIO:
    """PNG input and output."""

    def test_uint8_roundtrip(self, tmp_path):
        """Test that an 8-bit slice reads back unchanged."""
        image = CtSliceFactory(seed=4)
        write_slice(image, tmp_path / "a.png")
        again = read_slice(tmp_path / "a.png")
        assert np.array_equal(again.pixels, image.pixels)
        assert again.source_id == "a"

    def test_hu_sidecar_applied(self, tmp_path):
        """Test that the JSON sidecar rescales pixels to HU."""
        image = CtSlice(pixels=np.full((8, 8), 100, dtype=np.uint16))
        write_slice(image, tmp_path / "b.png")
        (tmp_path / "b.json").write_text(json.dumps({"slope": 1.0, "intercept": -1024}))
        again = read_slice(tmp_path / "b.png")
        assert np.allclose(again.pixels, -924.0)

    def test_malformed_sidecar(self, tmp_path):
        """Test that a sidecar missing a key is rejected."""
        write_slice(CtSliceFactory(), tmp_path / "c.png")
        (tmp_path / "c.json").write_text(json.dumps({"slope": 1.0}))
        with pytest.raises(InvalidSliceError):
            read_slice(tmp_path / "c.png")

    def test_float_slice_not_writable(self, tmp_path):
        """Test that a float slice cannot be written as PNG."""
        with pytest.raises(InvalidSliceError):
            write_slice(CtSlice(pixels=np.zeros((8, 8))), tmp_path / "d.png")

    def test_mask_written_as_0_255(self, tmp_path):
        """Test that a mask is written with levels 0 and 255."""
        bits = np.zeros((8, 8), dtype=bool)
        bits[2:4, 2:4] = True
        write_mask(BinaryMask(bits), tmp_path / "m.png")
        pixels = read_slice(tmp_path / "m.png").pixels
        assert set(np.unique(pixels).tolist()) == {0, 255}
        assert np.array_equal(pixels == 255, bits)
