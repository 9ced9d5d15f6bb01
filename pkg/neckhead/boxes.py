"""
neckhead.boxes
~~~~~~~~~~~~~~

Detections, box overlap and the anchor-free box parametrization.

A prediction map at stride ``s`` holds, per cell (i, j), the logits
``(t_x, t_y, t_w, t_h, t_obj, t_cls...)``. They decode to

    center = (cell + 2 * sigmoid(t_xy) - 0.5) * s
    size   = (2 * sigmoid(t_wh)) ** 2 * s
    score  = sigmoid(t_obj) * sigmoid(t_cls)

so a cell reaches centers within (-0.5, 1.5) cells of its corner and
sizes below 4 s.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import torch

BOX_LOGITS = 4
OBJ_INDEX = 4
CLS_OFFSET = 5

Box = Tuple[float, float, float, float]


@dataclass
class Detection:
    """One detected object.

    Attributes:
        box: (x1, y1, x2, y2) in pixels, clipped to the image. A box clipped
            entirely off the image collapses to zero width or height.
        score: objectness times class probability, in (0, 1).
        class_id: index into the dataset's class list.
        image_id: identifier of the source image.
    """

    box: Box
    score: float
    class_id: int = 0
    image_id: str = ""

    def to_dict(self) -> Dict[str, Any]:
        """Detection as plain JSON values, rounded for stable output."""
        return {
            "image": self.image_id,
            "box": [round(float(v), 4) for v in self.box],
            "score": round(float(self.score), 6),
            "class": int(self.class_id),
        }


def box_area(box: Sequence[float]) -> float:
    """Area of an xyxy box; zero when degenerate."""
    return max(0.0, box[2] - box[0]) * max(0.0, box[3] - box[1])


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    """Intersection over union of two boxes; 0 when the union has no area."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    inter = max(0.0, iw) * max(0.0, ih)
    union = box_area(a) + box_area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def box_iou(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Pairwise IoU of (n, 4) and (m, 4) boxes as an (n, m) tensor."""
    area_a = (a[:, 2] - a[:, 0]).clamp(min=0) * (a[:, 3] - a[:, 1]).clamp(min=0)
    area_b = (b[:, 2] - b[:, 0]).clamp(min=0) * (b[:, 3] - b[:, 1]).clamp(min=0)
    lt = torch.maximum(a[:, None, :2], b[None, :, :2])
    rb = torch.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = (rb - lt).clamp(min=0)
    inter = wh[..., 0] * wh[..., 1]
    union = area_a[:, None] + area_b[None, :] - inter
    safe = torch.where(union > 0, union, torch.ones_like(union))
    return torch.where(union > 0, inter / safe, torch.zeros_like(inter))


def cell_grid(height: int, width: int, dtype: torch.dtype) -> torch.Tensor:
    """(H*W, 2) tensor of (j, i) cell coordinates in row-major order."""
    ii, jj = torch.meshgrid(
        torch.arange(height, dtype=dtype), torch.arange(width, dtype=dtype), indexing="ij"
    )
    return torch.stack([jj, ii], dim=-1).reshape(-1, 2)


def split_map(raw_map: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(N, 5+K, H, W) -> box logits (N, HW, 4), objectness (N, HW), classes (N, HW, K)."""
    n, ch, h, w = raw_map.shape
    flat = raw_map.permute(0, 2, 3, 1).reshape(n, h * w, ch)
    return flat[..., :BOX_LOGITS], flat[..., OBJ_INDEX], flat[..., CLS_OFFSET:]


def decode_boxes(raw_map: torch.Tensor, stride: int) -> torch.Tensor:
    """Unclipped (N, HW, 4) xyxy boxes of one prediction map."""
    _, _, h, w = raw_map.shape
    t, _, _ = split_map(raw_map)
    cells = cell_grid(h, w, raw_map.dtype)
    center = (cells + 2.0 * torch.sigmoid(t[..., :2]) - 0.5) * stride
    size = (2.0 * torch.sigmoid(t[..., 2:])) ** 2 * stride
    return torch.cat([center - size / 2, center + size / 2], dim=-1)


def clip_boxes(boxes: torch.Tensor, image_size: Tuple[int, int]) -> torch.Tensor:
    """Clamp xyxy boxes into an image of ``(height, width)``."""
    height, width = image_size
    x = boxes[..., 0::2].clamp(0, width)
    y = boxes[..., 1::2].clamp(0, height)
    return torch.stack([x[..., 0], y[..., 0], x[..., 1], y[..., 1]], dim=-1)


def decode(
    raw: Mapping[int, torch.Tensor],
    image_size: Tuple[int, int],
    conf_thr: float = 0.0,
    image_ids: Optional[Sequence[str]] = None,
) -> List[List[Detection]]:
    """Turn prediction maps into per-image detections (before NMS).

    Every cell contributes its best class; detections scoring below
    ``conf_thr`` are dropped.
    """
    boxes, scores, classes = [], [], []
    for stride in sorted(raw):
        raw_map = raw[stride].detach()
        _, obj, cls = split_map(raw_map)
        probs = torch.sigmoid(obj).unsqueeze(-1) * torch.sigmoid(cls)
        best, best_class = probs.max(dim=-1)
        boxes.append(clip_boxes(decode_boxes(raw_map, stride), image_size))
        scores.append(best)
        classes.append(best_class)
    boxes_t = torch.cat(boxes, dim=1)
    scores_t = torch.cat(scores, dim=1)
    classes_t = torch.cat(classes, dim=1)

    n = boxes_t.shape[0]
    ids = list(image_ids) if image_ids is not None else [str(i) for i in range(n)]
    results = []
    for b in range(n):
        keep = torch.nonzero(scores_t[b] >= conf_thr).flatten().tolist()
        box_rows = boxes_t[b].tolist()
        score_row = scores_t[b].tolist()
        class_row = classes_t[b].tolist()
        results.append(
            [
                Detection(tuple(box_rows[k]), score_row[k], int(class_row[k]), ids[b])
                for k in keep
            ]
        )
    return results


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def encode(box: Sequence[float], cell: Tuple[int, int], stride: int) -> torch.Tensor:
    """Inverse of the box decoding for cell (i, j).

    Raises:
        ValueError: if the box center is not reachable from the cell or the
            box is not smaller than 4 strides.
    """
    i, j = cell
    x1, y1, x2, y2 = box
    cx, cy = (x1 + x2) / 2.0, (y1 + y2) / 2.0
    w, h = x2 - x1, y2 - y1
    ox = (cx / stride - j + 0.5) / 2.0
    oy = (cy / stride - i + 0.5) / 2.0
    sw = math.sqrt(max(w, 0.0) / stride) / 2.0
    sh = math.sqrt(max(h, 0.0) / stride) / 2.0
    for value, what in ((ox, "center x"), (oy, "center y"), (sw, "width"), (sh, "height")):
        if not 0.0 < value < 1.0:
            raise ValueError(f"box {tuple(box)} {what} not expressible from cell {cell} at stride {stride}")
    return torch.tensor([_logit(ox), _logit(oy), _logit(sw), _logit(sh)], dtype=torch.float64)
