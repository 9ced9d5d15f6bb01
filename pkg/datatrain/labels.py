"""
datatrain.labels
~~~~~~~~~~~~~~~~

Text label files: one line per object, ``class cx cy w h``, with the
center and size normalized by the image size, space separated and
newline terminated. An image without objects has an empty file.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from cployo.errors import DataError

log = logging.getLogger(__name__)

# normalized coordinates may overshoot [0, 1] by float noise
BOUNDS_TOLERANCE = 1e-6


class LabelFormatError(DataError):
    """Raised for a malformed or out-of-range label line; carries the file and line number."""

    def __init__(self, path: Union[str, Path], line_no: int, detail: str) -> None:
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {detail}")


@dataclass(frozen=True)
class LabelRow:
    """One normalized label line: class, box center and size as fractions of the image side."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    @classmethod
    def from_box(cls, box: Sequence[float], class_id: int, size: int) -> "LabelRow":
        """Label row of a pixel box in a square image of side ``size``."""
        x1, y1, x2, y2 = box
        return cls(class_id, (x1 + x2) / 2 / size, (y1 + y2) / 2 / size, (x2 - x1) / size, (y2 - y1) / size)

    def to_box(self, size: int) -> Tuple[float, float, float, float]:
        """Pixel box (x1, y1, x2, y2) in a square image of side ``size``."""
        return (
            (self.cx - self.w / 2) * size,
            (self.cy - self.h / 2) * size,
            (self.cx + self.w / 2) * size,
            (self.cy + self.h / 2) * size,
        )

    def to_line(self) -> str:
        """Label line with six decimals and a trailing newline."""
        return f"{self.class_id} {self.cx:.6f} {self.cy:.6f} {self.w:.6f} {self.h:.6f}\n"


def parse_line(line: str, path: Union[str, Path] = "<string>", line_no: int = 1, num_classes: int = 0) -> LabelRow:
    """Parse and validate one label line.

    Raises:
        LabelFormatError: for a wrong field count, a non-numeric field, an
            unknown class or a box reaching outside the image.
    """
    fields = line.split()
    if len(fields) != 5:
        raise LabelFormatError(path, line_no, f"expected 5 fields, got {len(fields)}")
    try:
        class_id = int(fields[0])
        cx, cy, w, h = (float(v) for v in fields[1:])
    except ValueError as exc:
        raise LabelFormatError(path, line_no, str(exc)) from exc
    if class_id < 0 or (num_classes and class_id >= num_classes):
        raise LabelFormatError(path, line_no, f"class {class_id} outside 0..{num_classes - 1}")
    values = np.array([cx, cy, w, h])
    if not np.all(np.isfinite(values)):
        raise LabelFormatError(path, line_no, "non-finite coordinate")
    if w <= 0 or h <= 0:
        raise LabelFormatError(path, line_no, f"non-positive size {w} x {h}")
    edges = np.array([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2])
    if np.any(values < -BOUNDS_TOLERANCE) or np.any(values > 1 + BOUNDS_TOLERANCE) or np.any(
        edges < -BOUNDS_TOLERANCE
    ) or np.any(edges > 1 + BOUNDS_TOLERANCE):
        raise LabelFormatError(path, line_no, f"box {tuple(values)} outside the unit square")
    return LabelRow(class_id, cx, cy, w, h)


def read_labels(path: Union[str, Path], size: int, num_classes: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Boxes as an (n, 4) pixel array clipped to the image, and their classes."""
    rows: List[LabelRow] = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        rows.append(parse_line(line, path, line_no, num_classes))
    boxes = np.array([row.to_box(size) for row in rows], dtype=np.float64).reshape(-1, 4)
    boxes = np.clip(boxes, 0.0, float(size))
    classes = np.array([row.class_id for row in rows], dtype=np.int64)
    return boxes, classes


def write_labels(path: Union[str, Path], boxes: Sequence[Sequence[float]], classes: Sequence[int], size: int) -> None:
    """Write one label line per box."""
    lines = [LabelRow.from_box(box, int(c), size).to_line() for box, c in zip(boxes, classes)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(lines))
    log.debug("Wrote %d labels to %s", len(lines), path)
