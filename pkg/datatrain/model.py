"""
datatrain.model
~~~~~~~~~~~~~~~

The full detector: backbone, fusion neck and detection head, wired from
a :class:`ModelConfig`.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import torch
from torch import nn

from backbone import Backbone, fuse_model, is_fused
from neckhead import (DetectionHead, MscafNeck, RawPrediction, decode, nms)
from neckhead.boxes import Detection

from .config import ModelConfig

log = logging.getLogger(__name__)


class CployoDetector(nn.Module):
    """Backbone, neck and head of the detector, built from a :class:`ModelConfig`."""

    def __init__(self, cfg: Optional[ModelConfig] = None) -> None:
        super().__init__()
        cfg = cfg or ModelConfig()
        self.cfg = cfg
        self.backbone = Backbone(
            in_ch=cfg.in_ch,
            width_mult=cfg.width_mult,
            depth_mult=cfg.depth_mult,
            use_c2f_repvitcamf=cfg.use_c2f_repvitcamf,
            reduction=cfg.reduction,
        )
        self.neck = MscafNeck(
            self.backbone.out_channels,
            use_mscaf=cfg.use_mscaf,
            use_kan_bottleneck=cfg.use_kan_bottleneck,
            reduction=cfg.reduction,
        )
        self.head = DetectionHead(self.neck.out_channels, cfg.num_classes)
        log.debug("CployoDetector %s", cfg.model_dump())

    def forward(self, images: torch.Tensor) -> RawPrediction:
        """Raw head maps keyed by stride."""
        return self.head(self.neck(self.backbone(images)))

    def fuse(self) -> int:
        """Fold every RepViT branch set for inference; returns how many were folded."""
        return fuse_model(self)

    @property
    def is_fused(self) -> bool:
        return is_fused(self)

    @torch.no_grad()
    def predict(
        self,
        images: torch.Tensor,
        image_ids: Optional[Sequence[str]] = None,
        conf_thr: float = 0.001,
        iou_thr: float = 0.45,
        score_thr: float = 0.001,
        max_out: int = 300,
    ) -> List[List[Detection]]:
        """Decode and suppress; the model's train/eval mode is restored afterwards."""
        was_training = self.training
        self.eval()
        try:
            raw = self(images)
        finally:
            self.train(was_training)
        size: Tuple[int, int] = (images.shape[2], images.shape[3])
        per_image = decode(raw, size, conf_thr, image_ids)
        return [nms(dets, iou_thr, score_thr, max_out) for dets in per_image]
