"""
datatrain.trainer
~~~~~~~~~~~~~~~~~

Training loops.

:class:`BaseAbstractTrainer` fixes the epoch loop (forward, detection
loss, backward, optimizer step, per-epoch record) and leaves model
construction to subclasses: :class:`DetectorTrainer` starts from a
seeded random init, :class:`FinetuneTrainer` from a pretrained
checkpoint with an optional frozen backbone.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import torch
from torch import nn

from cployo.errors import DataError, NumericError
from neckhead import assign_targets, detection_loss
from neckhead.loss import LossWeights

from .checkpoint import FORMAT_VERSION, Checkpoint, CheckpointVersionError
from .config import LrSchedule, Optimizer, TrainConfig, dump_config
from .dataset import Batch, NoduleDataset, iterate_batches
from .enhance import enhance_dataset
from .model import CployoDetector

log = logging.getLogger(__name__)


class NonFiniteLossError(NumericError):
    """Raised when the training loss stops being finite."""

    def __init__(self, epoch: int, batch_index: int, image_ids: Sequence[str], components: Dict[str, Any]) -> None:
        self.epoch = epoch
        self.batch_index = batch_index
        self.image_ids = list(image_ids)
        self.components = components
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch_index} "
            f"(images {self.image_ids}): {components}"
        )


@dataclass
class LoadReport:
    """Outcome of loading a pretrained state into a model.

    Attributes:
        loaded: model tensors copied from the checkpoint.
        skipped: model tensors left at their init (absent or shaped differently).
        unexpected: checkpoint tensors the model has no place for.
    """

    loaded: List[str] = field(default_factory=list)
    skipped: List[str] = field(default_factory=list)
    unexpected: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        """Report as a plain dict; loaded tensors are counted."""
        return {"loaded": len(self.loaded), "skipped": self.skipped, "unexpected": self.unexpected}


def load_matching(model: nn.Module, state: Dict[str, torch.Tensor]) -> LoadReport:
    """Copy every checkpoint tensor whose name and shape match the model."""
    report = LoadReport()
    own = model.state_dict()
    with torch.no_grad():
        for name, target in own.items():
            source = state.get(name)
            if source is None or tuple(source.shape) != tuple(target.shape):
                report.skipped.append(name)
                continue
            target.copy_(source.to(target.dtype))
            report.loaded.append(name)
    report.unexpected = sorted(set(state) - set(own))
    log.info(
        "Loaded %d tensors, skipped %d, unexpected %d",
        len(report.loaded), len(report.skipped), len(report.unexpected),
    )
    return report


def make_optimizer(cfg: TrainConfig, params: Sequence[nn.Parameter]) -> torch.optim.Optimizer:
    """Optimizer over ``params`` with the config's learning rate and weight decay."""
    if cfg.optimizer is Optimizer.ADAM:
        return torch.optim.Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    return torch.optim.AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay)


def make_scheduler(cfg: TrainConfig, optimizer: torch.optim.Optimizer) -> Optional[Any]:
    """Scheduler stepped once per epoch, or ``None`` for a constant rate."""
    if cfg.lr_schedule is LrSchedule.COSINE:
        return torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=cfg.epochs)
    return None


class BaseAbstractTrainer(ABC):
    """
    Template for a training run.

    :meth:`fit` runs the loop; subclasses provide the starting model
    through :meth:`_build_model`.
    """

    def __init__(self, cfg: TrainConfig, weights: Optional[LossWeights] = None) -> None:
        self.cfg = cfg
        self.weights = weights or LossWeights()
        self.model: Optional[CployoDetector] = None
        self.history: List[Dict[str, Any]] = []

    @abstractmethod
    def _build_model(self) -> CployoDetector:
        pass

    def _frozen(self, model: CployoDetector) -> List[nn.Module]:
        """Submodules kept fixed during training."""
        return [model.backbone] if self.cfg.freeze_backbone else []

    def fit(self, dataset: NoduleDataset, epochs: Optional[int] = None) -> Checkpoint:
        """
        Raises:
            DataError: if the dataset is empty.
            NonFiniteLossError: if a batch produces a non-finite loss.
        """
        if len(dataset) == 0:
            raise DataError("cannot train on an empty dataset")
        dataset = enhance_dataset(dataset, self.cfg.enhancement)

        torch.manual_seed(self.cfg.seed)
        model = self._build_model()
        frozen = self._frozen(model)
        for module in frozen:
            module.requires_grad_(False)
        params = [p for p in model.parameters() if p.requires_grad]
        optimizer = make_optimizer(self.cfg, params)
        scheduler = make_scheduler(self.cfg, optimizer)
        generator = torch.Generator().manual_seed(self.cfg.seed)

        self.history = []
        for epoch in range(epochs or self.cfg.epochs):
            model.train()
            for module in frozen:
                module.eval()
            record = self._run_epoch(model, optimizer, dataset, generator, epoch)
            record["lr"] = optimizer.param_groups[0]["lr"]
            if scheduler is not None:
                scheduler.step()
            self.history.append(record)
            log.info(
                "epoch %d: loss=%.5f box=%.5f obj=%.5f cls=%.5f",
                epoch, record["loss"], record["box"], record["obj"], record["cls"],
            )
        model.eval()
        self.model = model
        return self.checkpoint()

    def _run_epoch(
        self,
        model: CployoDetector,
        optimizer: torch.optim.Optimizer,
        dataset: NoduleDataset,
        generator: torch.Generator,
        epoch: int,
    ) -> Dict[str, Any]:
        totals = {"loss": 0.0, "box": 0.0, "obj": 0.0, "cls": 0.0}
        batches = 0
        for batch_index, batch in iterate_batches(dataset, self.cfg.batch_size, generator, self.cfg.hflip):
            out = self.step(model, optimizer, batch, epoch, batch_index)
            for key in ("box", "obj", "cls"):
                totals[key] += out[key]
            totals["loss"] += out["total"]
            batches += 1
        record: Dict[str, Any] = {"epoch": epoch}
        record.update({key: value / batches for key, value in totals.items()})
        return record

    def step(
        self,
        model: CployoDetector,
        optimizer: torch.optim.Optimizer,
        batch: Batch,
        epoch: int = 0,
        batch_index: int = 0,
    ) -> Dict[str, Any]:
        """One optimizer step on one batch; returns the loss breakdown."""
        raw = model(batch.images)
        shapes = {stride: tuple(m.shape[2:]) for stride, m in raw.items()}
        size: Tuple[int, int] = (batch.images.shape[2], batch.images.shape[3])
        targets = assign_targets(batch.boxes, shapes, size, batch.classes)
        out = detection_loss(raw, targets, self.weights, iou_aware=self.cfg.iou_aware)
        report = out.to_dict()
        if not math.isfinite(report["total"]):
            raise NonFiniteLossError(epoch, batch_index, batch.image_ids, report)
        optimizer.zero_grad()
        out.total.backward()
        optimizer.step()
        return report

    def checkpoint(self) -> Checkpoint:
        """Snapshot of the trained model and its history.

        Raises:
            DataError: if nothing has been trained yet.
        """
        if self.model is None:
            raise DataError("nothing trained yet")
        return Checkpoint(
            config=dump_config(self.cfg),
            state={k: v.detach().clone() for k, v in self.model.state_dict().items()},
            epoch=len(self.history),
            history=[dict(r) for r in self.history],
            fused=self.model.is_fused,
        )


class DetectorTrainer(BaseAbstractTrainer):
    """Trains a detector from a fresh init."""

    def _build_model(self) -> CployoDetector:
        return CployoDetector(self.cfg.model)


class FinetuneTrainer(BaseAbstractTrainer):
    """Starts from the tensors of a pretrained checkpoint that fit the configured model."""

    def __init__(self, cfg: TrainConfig, pretrained: Checkpoint, weights: Optional[LossWeights] = None) -> None:
        super().__init__(cfg, weights)
        if pretrained.format_version != FORMAT_VERSION:
            raise CheckpointVersionError(pretrained.format_version)
        if pretrained.fused:
            raise DataError("cannot fine-tune a fused checkpoint")
        self.pretrained = pretrained
        self.load_report: Optional[LoadReport] = None

    def _build_model(self) -> CployoDetector:
        model = CployoDetector(self.cfg.model)
        self.load_report = load_matching(model, self.pretrained.state)
        return model


def train(cfg: TrainConfig, dataset: NoduleDataset) -> Checkpoint:
    """Train a detector from scratch on ``dataset``."""
    trainer = DetectorTrainer(cfg)
    return trainer.fit(dataset)


def finetune(cfg: TrainConfig, pretrained: Checkpoint, dataset: NoduleDataset) -> Tuple[Checkpoint, LoadReport]:
    """Train from the matching tensors of ``pretrained``.

    Raises:
        CheckpointVersionError: for an unknown checkpoint format.
        DataError: if ``pretrained`` is fused.
    """
    trainer = FinetuneTrainer(cfg, pretrained)
    ckpt = trainer.fit(dataset)
    return ckpt, trainer.load_report
