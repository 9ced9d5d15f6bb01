"""
datatrain.dataset
~~~~~~~~~~~~~~~~~

Dataset directories (``images/*.png``, ``labels/*.txt``,
``manifest.json``), batching and horizontal-flip augmentation.
"""

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch.utils.data import Dataset

from cployo.errors import DataError
from imaging import read_slice

from .labels import read_labels

log = logging.getLogger(__name__)


class DatasetError(DataError):
    """Raised when a dataset directory is incomplete or inconsistent."""

    pass


@dataclass
class Sample:
    """One image with its pixel boxes (n x 4, x1 y1 x2 y2) and class ids."""

    image_id: str
    pixels: np.ndarray
    boxes: np.ndarray
    classes: np.ndarray

    @property
    def size(self) -> int:
        return int(self.pixels.shape[0])


@dataclass
class Batch:
    """Stacked images and per-image targets."""

    image_ids: List[str]
    images: torch.Tensor
    boxes: List[torch.Tensor]
    classes: List[torch.Tensor]

    def __len__(self) -> int:
        return len(self.image_ids)


def hflip(sample: Sample) -> Sample:
    """Mirror the image left to right and its boxes with it."""
    width = sample.pixels.shape[1]
    boxes = sample.boxes.copy()
    boxes[:, [0, 2]] = width - sample.boxes[:, [2, 0]]
    return replace(sample, pixels=np.ascontiguousarray(sample.pixels[:, ::-1]), boxes=boxes)


class NoduleDataset(Dataset):
    """All samples of a dataset directory, loaded eagerly."""

    def __init__(self, root: Union[str, Path], samples: Sequence[Sample], classes: Sequence[str], size: int) -> None:
        self.root = Path(root)
        self.samples = list(samples)
        self.classes = tuple(classes)
        self.size = size

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> Sample:
        return self.samples[index]

    def subset(self, indices: Sequence[int]) -> "NoduleDataset":
        """Dataset holding only the samples at ``indices``."""
        return NoduleDataset(self.root, [self.samples[k] for k in indices], self.classes, self.size)


def load_dataset(root: Union[str, Path]) -> NoduleDataset:
    """Read a dataset directory.

    Raises:
        DatasetError: if the manifest is missing, an image has no label file
            or an image does not match the manifest size.
        LabelFormatError: for a malformed label line.
    """
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"{root} has no manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        size = int(manifest["size"])
        classes = [str(c) for c in manifest["classes"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"malformed manifest {manifest_path}: {exc}") from exc

    samples = []
    for image_path in sorted((root / "images").glob("*.png")):
        label_path = root / "labels" / f"{image_path.stem}.txt"
        if not label_path.exists():
            raise DatasetError(f"{image_path.name} has no label file {label_path}")
        pixels = read_slice(image_path).pixels
        if pixels.shape != (size, size):
            raise DatasetError(f"{image_path.name} is {pixels.shape}, manifest says {size}x{size}")
        boxes, labels = read_labels(label_path, size, len(classes))
        samples.append(Sample(image_path.stem, pixels, boxes, labels))
    log.info("Loaded %d images from %s", len(samples), root)
    return NoduleDataset(root, samples, classes, size)


def to_tensor(pixels: np.ndarray) -> torch.Tensor:
    """uint8 H x W -> float32 1 x H x W in [0, 1]."""
    return torch.from_numpy(pixels.astype(np.float32) / 255.0).unsqueeze(0)


def collate(samples: Sequence[Sample]) -> Batch:
    """Stack samples into a :class:`Batch`."""
    return Batch(
        image_ids=[s.image_id for s in samples],
        images=torch.stack([to_tensor(s.pixels) for s in samples]),
        boxes=[torch.from_numpy(s.boxes.astype(np.float32)) for s in samples],
        classes=[torch.from_numpy(s.classes) for s in samples],
    )


def iterate_batches(
    dataset: NoduleDataset,
    batch_size: int,
    generator: Optional[torch.Generator] = None,
    flip: bool = False,
) -> Iterator[Tuple[int, Batch]]:
    """Yield ``(batch_index, batch)``; shuffled when a generator is given.

    With ``flip`` each sample is mirrored with probability one half, drawn
    from the same generator so the order stays seed-determined.
    """
    n = len(dataset)
    order = torch.randperm(n, generator=generator).tolist() if generator is not None else list(range(n))
    for batch_index, start in enumerate(range(0, n, batch_size)):
        chosen = [dataset[k] for k in order[start:start + batch_size]]
        if flip and generator is not None:
            coins = torch.rand(len(chosen), generator=generator).tolist()
            chosen = [hflip(s) if c < 0.5 else s for s, c in zip(chosen, coins)]
        yield batch_index, collate(chosen)
