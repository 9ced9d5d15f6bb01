"""
datatrain.config
~~~~~~~~~~~~~~~~

Typed run configuration. Every model rejects unknown keys, so a JSON
config with a misspelled field fails loudly instead of silently falling
back to a default.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Tuple, Union

from pydantic import (BaseModel, ConfigDict, Field, ValidationError,
                      model_validator)

from attention import DESK_REDUCTION
from cployo.errors import DataError

NODULE_CLASSES: Tuple[str, ...] = ("nodule",)
NODULE_TYPES: Tuple[str, ...] = ("solid", "part-solid", "ground-glass")


class ConfigError(DataError):
    """Raised when a configuration file cannot be parsed or validated."""

    pass


class Optimizer(str, Enum):
    """Optimizers a run can use."""

    ADAM = "adam"
    ADAMW = "adamw"


class LrSchedule(str, Enum):
    """Learning-rate schedules a run can use."""

    CONSTANT = "constant"
    COSINE = "cosine"


class ModelConfig(BaseModel):
    """Architecture of a detector and its three ablation switches."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    in_ch: int = Field(1, ge=1)
    num_classes: int = Field(1, ge=1)
    width_mult: float = Field(0.25, gt=0)
    depth_mult: float = Field(1.0, gt=0)
    use_c2f_repvitcamf: bool = True
    use_mscaf: bool = True
    use_kan_bottleneck: bool = True
    reduction: int = Field(DESK_REDUCTION, ge=1)


class TrainConfig(BaseModel):
    """Everything a training run needs: optimizer, schedule, model switches and evaluation thresholds."""

    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(300, ge=1)
    batch_size: int = Field(16, ge=1)
    lr: float = Field(0.001, gt=0)
    optimizer: Optimizer = Optimizer.ADAMW
    weight_decay: float = Field(0.0001, ge=0)
    lr_schedule: LrSchedule = LrSchedule.CONSTANT
    seed: int = 0
    width_mult: float = Field(0.25, gt=0)
    depth_mult: float = Field(1.0, gt=0)
    num_classes: int = Field(1, ge=1)
    use_c2f_repvitcamf: bool = True
    use_mscaf: bool = True
    use_kan_bottleneck: bool = True
    freeze_backbone: bool = False
    hflip: bool = False
    enhancement: str = "none"
    iou_aware: bool = True
    conf_thr: float = Field(0.001, ge=0, le=1)
    nms_iou_thr: float = Field(0.45, gt=0, le=1)
    score_thr: float = Field(0.25, ge=0, le=1)

    @property
    def model(self) -> ModelConfig:
        return ModelConfig(
            num_classes=self.num_classes,
            width_mult=self.width_mult,
            depth_mult=self.depth_mult,
            use_c2f_repvitcamf=self.use_c2f_repvitcamf,
            use_mscaf=self.use_mscaf,
            use_kan_bottleneck=self.use_kan_bottleneck,
        )


class SyntheticSpec(BaseModel):
    """Parameters of the synthetic nodule generator.

    Ranges are inclusive ``(low, high)`` pairs.
    """

    model_config = ConfigDict(extra="forbid")

    n_images: int = Field(32, ge=1)
    size: int = Field(64, ge=32)
    nodules_per_image: Tuple[int, int] = (0, 3)
    radius_px: Tuple[float, float] = (2.0, 8.0)
    contrast: Tuple[float, float] = (90.0, 160.0)
    noise_sigma: float = Field(6.0, ge=0)
    seed: int = 0
    num_classes: int = Field(1, ge=1, le=len(NODULE_TYPES))

    @model_validator(mode="after")
    def check_ranges(self) -> "SyntheticSpec":
        """Reject reversed ranges and radii that cannot fit the image."""
        for name in ("nodules_per_image", "radius_px", "contrast"):
            low, high = getattr(self, name)
            if low > high:
                raise ValueError(f"{name} range is reversed: {(low, high)}")
        if self.nodules_per_image[0] < 0:
            raise ValueError("nodules_per_image must be non-negative")
        if self.radius_px[0] < 2:
            raise ValueError("radius_px must be at least 2 so boxes are not degenerate")
        if 2 * self.radius_px[1] + 2 >= self.size / 2:
            raise ValueError(f"radius_px {self.radius_px} is too large for {self.size}px images")
        return self

    @property
    def classes(self) -> Tuple[str, ...]:
        return NODULE_CLASSES if self.num_classes == 1 else NODULE_TYPES[: self.num_classes]


ConfigModel = Union[ModelConfig, TrainConfig, SyntheticSpec]


def load_config(path: Union[str, Path], model: type = TrainConfig) -> Any:
    """Read a JSON config file into ``model``.

    Raises:
        ConfigError: if the file is not JSON or fails validation.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return model.model_validate(raw)
    except (json.JSONDecodeError, ValidationError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(cfg: BaseModel) -> Dict[str, Any]:
    """Config as plain JSON values."""
    return json.loads(cfg.model_dump_json())
