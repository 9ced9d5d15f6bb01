import pytest

from datatrain.evaluation import evaluate_checkpoint
from datatrain.trainer import train

from .factory import TrainConfigFactory, make_dataset


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_overfits_small_synthetic_set(tmp_path, seed):
    """Test that a few epochs on a tiny set drive the loss down."""
    dataset = make_dataset(tmp_path, n_images=32, nodules_per_image=(1, 3), radius_px=(2.0, 8.0), seed=seed)
    cfg = TrainConfigFactory(epochs=300, batch_size=16, width_mult=0.25, seed=seed, hflip=False)
    result = evaluate_checkpoint(train(cfg, dataset), dataset)
    assert result.map50 >= 0.90
