"""
datatrain.evaluation
~~~~~~~~~~~~~~~~~~~~

Checkpoint evaluation, single-image prediction and the ablation sweep.

Evaluation folds the RepViT branch sets first and runs in double
precision, so a checkpoint and its fused counterpart score the same.
"""

import copy
import itertools
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from backbone import AlreadyFusedError, count_params, profile_cost
from metrics import EvalResult, GroundTruth, evaluate, summarize_runs
from neckhead.boxes import Detection

from .checkpoint import Checkpoint, restore_state
from .config import TrainConfig
from .dataset import NoduleDataset, iterate_batches, to_tensor
from .enhance import enhance_dataset
from .model import CployoDetector
from .trainer import train

log = logging.getLogger(__name__)

ABLATION_FLAGS = ("use_c2f_repvitcamf", "use_mscaf", "use_kan_bottleneck")
EVAL_DTYPE = torch.float64


def config_of(ckpt: Checkpoint) -> TrainConfig:
    """Training config stored in a checkpoint."""
    return TrainConfig.model_validate(ckpt.config)


def model_from_checkpoint(ckpt: Checkpoint, fuse: bool = True, dtype: torch.dtype = EVAL_DTYPE) -> CployoDetector:
    """Rebuild the detector of a checkpoint, folded for inference unless ``fuse`` is off."""
    model = CployoDetector(config_of(ckpt).model)
    if ckpt.fused:
        model.fuse()
    restore_state(model, ckpt.state)
    if fuse and not ckpt.fused:
        model.fuse()
    return model.to(dtype).eval()


def ground_truth(dataset: NoduleDataset) -> List[List[GroundTruth]]:
    """Ground-truth boxes of every image, in dataset order."""
    return [
        [GroundTruth(tuple(box), int(c), s.image_id) for box, c in zip(s.boxes.tolist(), s.classes.tolist())]
        for s in dataset
    ]


def detect_dataset(
    model: CployoDetector, dataset: NoduleDataset, cfg: TrainConfig, batch_size: int = 16
) -> List[List[Detection]]:
    """Detections of every image at the config's confidence and NMS thresholds."""
    dtype = next(model.parameters()).dtype
    out: List[List[Detection]] = []
    for _, batch in iterate_batches(dataset, batch_size):
        out.extend(
            model.predict(
                batch.images.to(dtype),
                batch.image_ids,
                conf_thr=cfg.conf_thr,
                iou_thr=cfg.nms_iou_thr,
                score_thr=cfg.conf_thr,
            )
        )
    return out


def evaluate_model(model: CployoDetector, dataset: NoduleDataset, cfg: TrainConfig) -> EvalResult:
    """Metrics of ``model`` on ``dataset``."""
    dataset = enhance_dataset(dataset, cfg.enhancement)
    return evaluate(detect_dataset(model, dataset, cfg), ground_truth(dataset), score_thr=cfg.score_thr)


def evaluate_checkpoint(ckpt: Checkpoint, dataset: NoduleDataset, fuse: bool = True) -> EvalResult:
    """Precision, recall, mAP50 and mAP50-95 of a checkpoint on a dataset."""
    cfg = config_of(ckpt)
    model = model_from_checkpoint(ckpt, fuse=fuse)
    log.info("Evaluating checkpoint (epoch %d, fused=%s) on %d images", ckpt.epoch, model.is_fused, len(dataset))
    return evaluate_model(model, dataset, cfg)


def predict(ckpt: Checkpoint, pixels: np.ndarray, image_id: str = "") -> List[Detection]:
    """Detections for one uint8 slice at the checkpoint's NMS settings."""
    cfg = config_of(ckpt)
    model = model_from_checkpoint(ckpt)
    images = to_tensor(pixels).unsqueeze(0).to(EVAL_DTYPE)
    return model.predict(images, [image_id], cfg.conf_thr, cfg.nms_iou_thr, cfg.score_thr)[0]


FUSE_SAMPLES = 200


@dataclass
class FuseReport:
    """Agreement between a checkpoint and its fused counterpart on random images."""

    samples: int
    max_abs_diff: float
    params_before: int
    params_after: int
    folded: int

    def to_dict(self) -> Dict[str, Any]:
        """Report as a plain dict."""
        return asdict(self)


def fuse_checkpoint(
    ckpt: Checkpoint, size: int = 64, samples: int = FUSE_SAMPLES, seed: int = 0
) -> Tuple[Checkpoint, FuseReport]:
    """Fold every RepViT branch set and measure the raw-map drift it causes.

    Both models run in double precision on the same seeded random images.

    Raises:
        AlreadyFusedError: if the checkpoint is already fused.
    """
    if ckpt.fused:
        raise AlreadyFusedError("checkpoint")
    reference = model_from_checkpoint(ckpt, fuse=False)
    fused = copy.deepcopy(reference)
    folded = fused.fuse()
    in_ch = reference.cfg.in_ch

    generator = torch.Generator().manual_seed(seed)
    worst = 0.0
    with torch.no_grad():
        for _ in range(samples):
            x = torch.rand(1, in_ch, size, size, generator=generator, dtype=EVAL_DTYPE)
            a, b = reference(x), fused(x)
            worst = max(worst, max((a[s] - b[s]).abs().max().item() for s in a))

    report = FuseReport(samples, worst, count_params(reference), count_params(fused), folded)
    log.info("Fused %d branch sets: %s", folded, report.to_dict())
    fused_ckpt = Checkpoint(
        config=dict(ckpt.config),
        state={k: v.detach().to(torch.float32).clone() for k, v in fused.state_dict().items()},
        epoch=ckpt.epoch,
        history=[dict(r) for r in ckpt.history],
        fused=True,
    )
    return fused_ckpt, report


def flag_combinations() -> Iterable[Dict[str, bool]]:
    """Every on/off combination of the three ablation switches, all-on first."""
    for values in itertools.product((True, False), repeat=len(ABLATION_FLAGS)):
        yield dict(zip(ABLATION_FLAGS, values))


def run_ablation(
    base: TrainConfig,
    dataset: NoduleDataset,
    seeds: Sequence[int] = (0,),
    epochs: Optional[int] = None,
) -> pd.DataFrame:
    """Train and evaluate every combination of the three module flags.

    Returns one row per (flags, seed) with the metric columns, the
    parameter count and the multiply-adds of one image at inference.
    """
    records: List[Dict[str, Any]] = []
    for flags in flag_combinations():
        for seed in seeds:
            cfg = base.model_copy(update={**flags, "seed": seed, **({"epochs": epochs} if epochs else {})})
            ckpt = train(cfg, dataset)
            result = evaluate_checkpoint(ckpt, dataset)
            model = model_from_checkpoint(ckpt, dtype=torch.float32)
            cost = profile_cost(model, (1, 1, dataset.size, dataset.size))
            record: Dict[str, Any] = {**flags, "seed": seed}
            record.update({k: v for k, v in result.to_dict().items() if not isinstance(v, dict)})
            record["params"] = count_params(CployoDetector(cfg.model))
            record["fused_params"] = cost.params
            record["mults_adds"] = cost.mults_adds
            records.append(record)
            log.info("ablation %s seed=%d map50=%.4f", flags, seed, result.map50)
    return pd.DataFrame.from_records(records)


def summarize_ablation(table: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation over seeds for each flag combination."""
    return summarize_runs(table.to_dict(orient="records"), by=list(ABLATION_FLAGS))
