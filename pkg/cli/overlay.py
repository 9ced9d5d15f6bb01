"""
cli.overlay
~~~~~~~~~~~

Annotated copies of a slice with detection boxes drawn over it.
"""

from pathlib import Path
from typing import Sequence, Union

import numpy as np
from PIL import Image, ImageDraw

from neckhead import Detection

CLASS_COLOURS = ((255, 64, 64), (64, 200, 64), (64, 128, 255))


def draw_detections(pixels: np.ndarray, detections: Sequence[Detection], width: int = 1) -> Image.Image:
    """RGB image of ``pixels`` with one rectangle and score label per detection."""
    image = Image.fromarray(pixels.astype(np.uint8)).convert("RGB")
    draw = ImageDraw.Draw(image)
    for det in detections:
        colour = CLASS_COLOURS[det.class_id % len(CLASS_COLOURS)]
        x1, y1, x2, y2 = det.box
        draw.rectangle([x1, y1, max(x1, x2), max(y1, y2)], outline=colour, width=width)
        draw.text((x1, max(0.0, y1 - 10)), f"{det.score:.2f}", fill=colour)
    return image


def save_overlay(
    pixels: np.ndarray, detections: Sequence[Detection], path: Union[str, Path]
) -> Path:
    """Write the annotated slice as a PNG and return its path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    draw_detections(pixels, detections).save(path, format="PNG")
    return path
