import numpy as np
from PIL import Image

from neckhead import Detection

from ..overlay import CLASS_COLOURS, draw_detections, save_overlay


class TestOverlay:
    """Detection overlays."""

    def test_box_outline_drawn(self):
        """Test that a detection box is outlined in its class colour."""
        pixels = np.zeros((32, 32), dtype=np.uint8)
        image = np.array(draw_detections(pixels, [Detection((8.0, 12.0, 20.0, 24.0), 0.9)]))
        assert image.shape == (32, 32, 3)
        assert tuple(image[24, 14]) == CLASS_COLOURS[0]
        assert tuple(image[18, 14]) == (0, 0, 0)

    def test_no_detections_is_grey_copy(self):
        """Test that without detections the overlay is an RGB copy of the slice."""
        pixels = np.arange(64, dtype=np.uint8).reshape(8, 8)
        image = np.array(draw_detections(pixels, []))
        assert np.array_equal(image[..., 0], pixels)
        assert np.array_equal(image[..., 2], pixels)

    def test_save(self, tmp_path):
        """Test that the overlay is saved as a PNG."""
        path = save_overlay(np.zeros((16, 16), dtype=np.uint8), [], tmp_path / "sub" / "o.png")
        with Image.open(path) as img:
            assert img.mode == "RGB"
