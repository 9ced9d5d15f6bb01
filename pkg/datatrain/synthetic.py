"""
datatrain.synthetic
~~~~~~~~~~~~~~~~~~~

Desk-scale stand-in for a chest CT corpus: a bright body ellipse holding
two dark elliptical lung fields, Gaussian noise, and bright soft-edged
disks (the nodules) with their exact bounding boxes as labels.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from imaging import CtSlice, write_slice

from .config import SyntheticSpec
from .labels import write_labels

log = logging.getLogger(__name__)

AIR = 0.0
BODY = 150.0
LUNG = 35.0
# contrast multiplier per nodule type: solid, part-solid, ground-glass
TYPE_CONTRAST = (1.0, 0.7, 0.45)
MAX_PLACEMENT_TRIES = 200


@dataclass
class Nodule:
    """One nodule disk: center and radius in pixels, intensity contrast and class."""

    cx: float
    cy: float
    radius: float
    contrast: float
    class_id: int = 0

    @property
    def box(self) -> Tuple[float, float, float, float]:
        return (self.cx - self.radius, self.cy - self.radius, self.cx + self.radius, self.cy + self.radius)


def _ellipse(size: int, cx: float, cy: float, ax: float, ay: float) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    return ((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 <= 1.0


def lung_fields(size: int) -> List[Tuple[float, float, float, float]]:
    """(cx, cy, ax, ay) of the left and right lung ellipses."""
    return [
        (0.32 * size, 0.5 * size, 0.15 * size, 0.3 * size),
        (0.68 * size, 0.5 * size, 0.15 * size, 0.3 * size),
    ]


def background(size: int) -> np.ndarray:
    """Noise-free body and lungs as a float canvas."""
    canvas = np.full((size, size), AIR)
    canvas[_ellipse(size, size / 2, size / 2, 0.47 * size, 0.43 * size)] = BODY
    for cx, cy, ax, ay in lung_fields(size):
        canvas[_ellipse(size, cx, cy, ax, ay)] = LUNG
    return canvas


def draw_nodule(canvas: np.ndarray, nodule: Nodule) -> np.ndarray:
    """Add a disk whose edge ramps linearly to zero over one pixel, in place.

    Pixels whose centers lie within ``radius + 0.5`` of the nodule center
    receive intensity, so the tight pixel box of the disk is the label box
    to within a pixel.
    """
    size_y, size_x = canvas.shape
    yy, xx = np.mgrid[0:size_y, 0:size_x] + 0.5
    dist = np.hypot(xx - nodule.cx, yy - nodule.cy)
    canvas += nodule.contrast * np.clip(nodule.radius + 0.5 - dist, 0.0, 1.0)
    return canvas


def sample_nodules(spec: SyntheticSpec, rng: np.random.Generator) -> List[Nodule]:
    """Non-overlapping nodules centered inside the lung fields."""
    count = int(rng.integers(spec.nodules_per_image[0], spec.nodules_per_image[1] + 1))
    fields = lung_fields(spec.size)
    nodules: List[Nodule] = []
    for _ in range(MAX_PLACEMENT_TRIES):
        if len(nodules) == count:
            break
        radius = float(rng.uniform(*spec.radius_px))
        cx, cy, ax, ay = fields[int(rng.integers(len(fields)))]
        angle = rng.uniform(0, 2 * np.pi)
        reach = np.sqrt(rng.uniform(0, 1))
        x = cx + reach * ax * np.cos(angle)
        y = cy + reach * ay * np.sin(angle)
        low, high = radius + 1.0, spec.size - radius - 1.0
        if not (low <= x <= high and low <= y <= high):
            continue
        if any(np.hypot(x - n.cx, y - n.cy) < radius + n.radius + 2.0 for n in nodules):
            continue
        class_id = int(rng.integers(spec.num_classes))
        contrast = float(rng.uniform(*spec.contrast)) * TYPE_CONTRAST[class_id]
        nodules.append(Nodule(float(x), float(y), radius, contrast, class_id))
    if len(nodules) < count:
        log.warning("placed %d of %d nodules", len(nodules), count)
    return nodules


def render(size: int, nodules: Sequence[Nodule], noise_sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Canvas with nodules and noise, rounded and clipped to uint8."""
    canvas = background(size)
    for nodule in nodules:
        draw_nodule(canvas, nodule)
    if noise_sigma > 0:
        canvas = canvas + rng.normal(0.0, noise_sigma, canvas.shape)
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)


def generate_image(spec: SyntheticSpec, index: int) -> Tuple[np.ndarray, List[Nodule]]:
    """One image and its nodules; depends only on the seed and the index."""
    rng = np.random.default_rng([spec.seed, index])
    nodules = sample_nodules(spec, rng)
    return render(spec.size, nodules, spec.noise_sigma, rng), nodules


def generate_synthetic(spec: SyntheticSpec, out_dir: Union[str, Path]) -> Path:
    """Write ``images/*.png``, ``labels/*.txt`` and ``manifest.json`` under ``out_dir``."""
    root = Path(out_dir)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    total = 0
    for index in range(spec.n_images):
        stem = f"{index:05d}"
        pixels, nodules = generate_image(spec, index)
        write_slice(CtSlice(pixels=pixels, source_id=stem), root / "images" / f"{stem}.png")
        write_labels(
            root / "labels" / f"{stem}.txt",
            [n.box for n in nodules],
            [n.class_id for n in nodules],
            spec.size,
        )
        total += len(nodules)
    manifest = {"size": spec.size, "classes": list(spec.classes)}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("Generated %d images with %d nodules in %s", spec.n_images, total, root)
    return root
