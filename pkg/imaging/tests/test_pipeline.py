import numpy as np
import pytest

from imaging.clustering import initial_centroids, kmeans_segment
from imaging.pipeline import apply_mask, segment_lung, segment_lung_kmeans
from imaging.slices import (BinaryMask, CtSlice, DegenerateHistogramError,
                            SegmentationConfig, ShapeMismatchError)
from imaging.threshold import binarize, otsu_threshold
from imaging.tests.factory import (CtSliceFactory, PhantomFactory,
                                   SegmentationConfigFactory, dice)


@pytest.fixture
def cfg():
    return SegmentationConfigFactory()


class TestSegmentLung:
    """Threshold route on synthetic phantoms."""

    def test_noiseless_phantom(self, cfg):
        """Test a noiseless phantom."""
        phantom = PhantomFactory(seed=3)
        mask = segment_lung(phantom.image, cfg)
        assert dice(mask.bits, phantom.lung_mask) >= 0.95

    @pytest.mark.parametrize("seed", range(50))
    def test_phantom_dice(self, cfg, seed):
        """Test Dice against the phantom mask over fifty phantoms."""
        phantom = PhantomFactory(seed=seed, speckle=seed % 2 == 1, noise_sigma=4.0 if seed % 5 == 0 else 0.0)
        mask = segment_lung(phantom.image, cfg)
        assert dice(mask.bits, phantom.lung_mask) >= 0.95

    @pytest.mark.parametrize("seed", range(5))
    def test_speckle_removed(self, cfg, seed):
        """Test that speckle does not change the mask."""
        clean = PhantomFactory(seed=seed)
        noisy = PhantomFactory(seed=seed, speckle=True)
        assert not np.array_equal(clean.image.pixels, noisy.image.pixels)
        assert segment_lung(noisy.image, cfg) == segment_lung(clean.image, cfg)

    def test_all_bright_slice_gives_empty_mask(self, cfg):
        """Test that a slice with no dark region gives an empty mask."""
        pixels = np.full((32, 32), 250, dtype=np.uint8)
        pixels[0, 0] = 249
        assert segment_lung(CtSlice(pixels=pixels), cfg).area == 0

    @pytest.mark.parametrize("low", [200, 240])
    @pytest.mark.parametrize("seed", range(5))
    def test_noisy_bright_slice_gives_empty_mask(self, low, seed):
        """Otsu still splits pure noise; the class-mean gap says there is no lung."""
        rng = np.random.default_rng(seed)
        pixels = rng.integers(low, 256, size=(64, 64)).astype(np.uint8)
        image = CtSlice(pixels=pixels)
        assert segment_lung(image, SegmentationConfig.for_shape(64, 64)).area == 0

    def test_contrast_guard_can_be_disabled(self):
        """Test that ``min_contrast=0`` lets noise through."""
        rng = np.random.default_rng(0)
        pixels = rng.integers(200, 256, size=(64, 64)).astype(np.uint8)
        cfg = SegmentationConfigFactory(min_contrast=0, min_area_px=1, second_min_area_px=1, border_clear=False)
        assert segment_lung(CtSlice(pixels=pixels), cfg).area > 0

    def test_constant_slice_propagates_otsu_error(self, cfg):
        """Test that a constant slice raises ``DegenerateHistogramError``."""
        with pytest.raises(DegenerateHistogramError):
            segment_lung(CtSlice(pixels=np.full((16, 16), 9, dtype=np.uint8)), cfg)

    def test_deterministic(self, cfg):
        """Test that two runs give identical masks."""
        phantom = PhantomFactory(seed=7, noise_sigma=6.0)
        first = segment_lung(phantom.image, cfg)
        second = segment_lung(phantom.image, cfg)
        assert first.bits.tobytes() == second.bits.tobytes()

    def test_masked_image_zero_outside(self, cfg):
        """Test that masking zeroes every pixel outside the lung."""
        phantom = PhantomFactory(seed=11)
        mask = segment_lung(phantom.image, cfg)
        masked = apply_mask(phantom.image, mask)
        assert np.all(masked.pixels[~mask.bits] == 0)

    def test_scaled_defaults(self):
        """Test the area limits scaled to the slice size."""
        scaled = SegmentationConfig.for_shape(64, 64)
        assert scaled.min_area_px == 1
        assert scaled.second_min_area_px == 8
        assert SegmentationConfig.for_shape(512, 512).second_min_area_px == 512


class TestSegmentLungKmeans:
    """K-means route."""

    @pytest.mark.parametrize("seed", range(5))
    def test_phantom_dice(self, cfg, seed):
        """Test Dice against the phantom mask."""
        phantom = PhantomFactory(seed=seed)
        mask = segment_lung_kmeans(phantom.image, cfg)
        assert dice(mask.bits, phantom.lung_mask) >= 0.9


class TestApplyMask:
    """Pixel-wise AND of mask and slice."""

    def test_all_true_identity(self):
        """Test that an all-true mask returns the slice."""
        image = CtSliceFactory()
        out = apply_mask(image, BinaryMask(np.ones(image.shape, dtype=bool)))
        assert np.array_equal(out.pixels, image.pixels)

    def test_all_false_zero(self):
        """Test that an all-false mask zeroes the slice."""
        image = CtSliceFactory()
        out = apply_mask(image, BinaryMask(np.zeros(image.shape, dtype=bool)))
        assert not out.pixels.any()

    def test_half_mask(self):
        """Test a mask covering the left half."""
        image = CtSliceFactory(height=16, width=16)
        bits = np.zeros((16, 16), dtype=bool)
        bits[:, :8] = True
        out = apply_mask(image, BinaryMask(bits))
        assert np.array_equal(out.pixels[:, :8], image.pixels[:, :8])
        assert not out.pixels[:, 8:].any()

    def test_shape_mismatch(self):
        """Test that masks of another shape are rejected."""
        image = CtSliceFactory(height=16, width=16)
        with pytest.raises(ShapeMismatchError):
            apply_mask(image, BinaryMask(np.ones((16, 8), dtype=bool)))


def optimal_two_means(values: np.ndarray) -> float:
    """Exhaustive search over every split of the sorted distinct values; returns the split point."""
    levels = np.unique(values)
    best_cost, best_split = None, None
    for i in range(1, len(levels)):
        low = values[values < levels[i]].astype(np.float64)
        high = values[values >= levels[i]].astype(np.float64)
        cost = ((low - low.mean()) ** 2).sum() + ((high - high.mean()) ** 2).sum()
        if best_cost is None or cost < best_cost:
            best_cost, best_split = cost, levels[i]
    return best_split


class TestKmeansSegment:
    """One-dimensional K-means."""

    def test_two_delta_matches_otsu(self):
        """Test that two levels split like Otsu."""
        pixels = np.full((10, 10), 10, dtype=np.uint8)
        pixels[:, 5:] = 240
        image = CtSlice(pixels=pixels)
        assert kmeans_segment(image, 2, seed=0) == binarize(image, otsu_threshold(image))

    def test_constant_image_fails(self):
        """Test that a constant slice raises."""
        with pytest.raises(DegenerateHistogramError):
            kmeans_segment(CtSlice(pixels=np.full((10, 10), 3, dtype=np.uint8)), 2, seed=0)

    def test_k_below_two_rejected(self):
        """Test that fewer than two clusters is rejected."""
        with pytest.raises(ValueError):
            kmeans_segment(CtSliceFactory(), 1, seed=0)

    @pytest.mark.parametrize("seed", range(10))
    def test_bimodal_matches_optimal_split(self, seed):
        """Test that two modes split at the optimal point."""
        rng = np.random.default_rng(seed)
        low = rng.normal(60, 10, size=300)
        high = rng.normal(190, 12, size=324)
        pixels = np.clip(np.rint(np.concatenate([low, high])), 0, 255).astype(np.uint8)
        pixels = rng.permutation(pixels).reshape(24, 26)
        mask = kmeans_segment(CtSlice(pixels=pixels), 2, seed=seed)
        split = optimal_two_means(pixels)
        assert np.array_equal(mask.bits, pixels < split)

    def test_same_seed_same_mask(self):
        """Test that the same seed gives the same mask."""
        image = CtSliceFactory(seed=99)
        assert kmeans_segment(image, 3, seed=5) == kmeans_segment(image, 3, seed=5)

    def test_init_follows_pixel_histogram(self):
        """Test that the initial centroids follow the pixel counts."""
        levels = np.array([10.0, 50.0, 200.0])
        counts = np.array([60, 30, 10])
        assert initial_centroids(levels, counts, 2).tolist() == [10.0, 50.0]
        assert initial_centroids(levels, np.array([1, 1, 1]), 3).tolist() == [10.0, 50.0, 200.0]

    def test_skewed_histogram(self):
        """Most pixels are dark lung; the bright minority forms the other cluster."""
        pixels = np.full((20, 20), 30, dtype=np.uint8)
        pixels[:, :4] = 35
        pixels[:3, :] = 180
        pixels[:3, :2] = 190
        mask = kmeans_segment(CtSlice(pixels=pixels), 2, seed=0)
        assert np.array_equal(mask.bits, pixels < 100)

    def test_seed_does_not_change_result(self):
        """Test that the seed does not affect the mask."""
        image = CtSliceFactory(seed=4)
        assert kmeans_segment(image, 3, seed=0) == kmeans_segment(image, 3, seed=17)
