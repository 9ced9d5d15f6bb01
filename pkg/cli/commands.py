"""
cli.commands
~~~~~~~~~~~~

The ``cployo`` command group: synthetic data, lung segmentation,
training, evaluation, detection, branch fusion, gradient checks, the
ablation sweep and the cost report.

Exit codes: 0 success, 1 usage error, 2 data error (bad file, label,
config or checkpoint), 3 numeric failure (non-finite loss, gradient
check over tolerance).
"""

import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import click
import torch

from backbone import count_params, measure_throughput, profile_cost
from cployo import settings
from datatrain import (CployoDetector, ModelConfig, SyntheticSpec, TrainConfig,
                       evaluate_checkpoint, finetune, fuse_checkpoint,
                       generate_synthetic, load_checkpoint, load_config,
                       load_dataset, model_from_checkpoint, predict,
                       run_ablation, save_checkpoint, summarize_ablation, train)
from imaging import (SegmentationConfig, quantize_8bit, read_slice,
                     segment_lung, segment_lung_kmeans, write_mask)

from .gradsuite import DEFAULT_TOLERANCE, GradSuiteFactory, run_suite
from .output import (EXIT_OK, EXIT_USAGE, format_option, frame_records,
                     handled)
from .overlay import save_overlay

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".pgm")


class CployoGroup(click.Group):
    """Group whose usage errors exit 1 instead of click's default 2."""

    def main(self, *args: Any, **kwargs: Any) -> None:
        """Run the group and exit with the command's code."""
        kwargs["standalone_mode"] = False
        try:
            rv = super().main(*args, **kwargs)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def _train_config(path: Optional[str], **overrides: Any) -> TrainConfig:
    cfg = load_config(path) if path else TrainConfig()
    updates = {k: v for k, v in overrides.items() if v is not None}
    return cfg.model_copy(update=updates) if updates else cfg


def _slices(source: Path) -> Sequence[Path]:
    if source.is_dir():
        return sorted(p for p in source.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    return [source]


@click.group(cls=CployoGroup)
def cli() -> None:
    """Lung nodule detection: data, segmentation, training and evaluation."""
    settings.configure_threads()


@cli.command("gen-data")
@click.option("--n", "n_images", type=int, default=32, show_default=True)
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--classes", "num_classes", type=click.IntRange(1, 3), default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@format_option
@handled
def gen_data(n_images: int, size: int, seed: int, num_classes: int, out: str, fmt: str) -> Dict[str, Any]:
    """Write a synthetic nodule dataset."""
    spec = SyntheticSpec(n_images=n_images, size=size, seed=seed, num_classes=num_classes)
    root = generate_synthetic(spec, out)
    dataset = load_dataset(root)
    return {
        "out": str(root),
        "images": len(dataset),
        "nodules": sum(len(s.boxes) for s in dataset),
        "classes": list(dataset.classes),
    }


@cli.command()
@click.option("--in", "source", type=click.Path(), required=True, help="A slice or a directory of slices.")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--min-area", type=click.IntRange(min=1), default=None, help="Noise area-opening threshold in px.")
@click.option("--kmeans", "kmeans_k", type=click.IntRange(min=2), default=None, help="Use the K-means route with K clusters.")
@format_option
@handled
def segment(source: str, out: str, min_area: Optional[int], kmeans_k: Optional[int], fmt: str) -> Dict[str, Any]:
    """Segment the lung parenchyma of each slice into a mask PNG."""
    paths = _slices(Path(source))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for path in paths:
        image = read_slice(path)
        overrides: Dict[str, Any] = {}
        if min_area is not None:
            overrides["min_area_px"] = min_area
        if kmeans_k is not None:
            overrides["kmeans_k"] = kmeans_k
        cfg = SegmentationConfig.for_shape(*image.shape, **overrides)
        mask = segment_lung_kmeans(image, cfg) if kmeans_k else segment_lung(image, cfg)
        mask_path = out_dir / f"{path.stem}_mask.png"
        write_mask(mask, mask_path)
        rows.append({"image": path.name, "mask": str(mask_path), "area": mask.area})
    return {"method": "kmeans" if kmeans_k else "otsu", "masks": rows}


@cli.command("train")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--data", type=click.Path(), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--epochs", type=click.IntRange(min=1), default=None, help="Override the config's epoch count.")
@click.option("--seed", type=int, default=None, help="Override the config's seed.")
@click.option("--pretrained", type=click.Path(dir_okay=False), default=None, help="Fine-tune from this checkpoint.")
@format_option
@handled
def train_command(
    config_path: Optional[str],
    data: str,
    out: str,
    epochs: Optional[int],
    seed: Optional[int],
    pretrained: Optional[str],
    fmt: str,
) -> Dict[str, Any]:
    """Train a detector and write its checkpoint."""
    cfg = _train_config(config_path, epochs=epochs, seed=seed)
    dataset = load_dataset(data)
    result: Dict[str, Any] = {}
    if pretrained:
        ckpt, report = finetune(cfg, load_checkpoint(pretrained), dataset)
        result["loaded"] = report.to_dict()
    else:
        ckpt = train(cfg, dataset)
    path = save_checkpoint(ckpt, out)
    result.update({"checkpoint": str(path), "epochs": ckpt.epoch, "history": ckpt.history})
    return result


@cli.command("eval")
@click.option("--ckpt", type=click.Path(dir_okay=False), required=True)
@click.option("--data", type=click.Path(), required=True)
@click.option("--fuse/--no-fuse", default=True, show_default=True, help="Fold RepViT branches before evaluating.")
@format_option
@handled
def eval_command(ckpt: str, data: str, fuse: bool, fmt: str) -> Dict[str, Any]:
    """Precision, recall, mAP50 and mAP50-95 of a checkpoint on a dataset."""
    dataset = load_dataset(data)
    result = evaluate_checkpoint(load_checkpoint(ckpt), dataset, fuse=fuse)
    return {"images": len(dataset), **result.to_dict()}


@cli.command()
@click.option("--ckpt", type=click.Path(dir_okay=False), required=True)
@click.option("--image", type=click.Path(dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write an annotated PNG here.")
@format_option
@handled
def detect(ckpt: str, image: str, out: Optional[str], fmt: str) -> Dict[str, Any]:
    """Detect nodules on one slice."""
    ct = read_slice(image)
    pixels = quantize_8bit(ct)
    detections = predict(load_checkpoint(ckpt), pixels, ct.source_id)
    overlay = str(save_overlay(pixels, detections, out)) if out else None
    return {"image": ct.source_id, "detections": [d.to_dict() for d in detections], "overlay": overlay}


@cli.command()
@click.option("--ckpt", type=click.Path(dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--samples", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--size", type=click.IntRange(min=32), default=64, show_default=True, help="Side in px of the random test images.")
@format_option
@handled
def fuse(ckpt: str, out: str, samples: int, size: int, fmt: str) -> Dict[str, Any]:
    """Fold RepViT branch sets and report output drift over random images."""
    fused, report = fuse_checkpoint(load_checkpoint(ckpt), size=size, samples=samples)
    path = save_checkpoint(fused, out)
    return {"checkpoint": str(path), **report.to_dict()}


@cli.command()
@click.option(
    "--module",
    "module_name",
    type=click.Choice(["all"] + GradSuiteFactory.names()),
    default="all",
    show_default=True,
)
@click.option("--seeds", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--tolerance", type=float, default=DEFAULT_TOLERANCE, show_default=True)
@format_option
@handled
def gradcheck(module_name: str, seeds: int, tolerance: float, fmt: str) -> Dict[str, Any]:
    """Finite-difference gradient check of the differentiable blocks."""
    names = GradSuiteFactory.names() if module_name == "all" else [module_name]
    rows = run_suite(names, seeds=range(seeds), tolerance=tolerance)
    return {"tolerance": tolerance, "blocks": rows}


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--data", type=click.Path(), required=True)
@click.option("--seed", "seeds", type=int, multiple=True, help="Repeat for several seeds.")
@click.option("--epochs", type=click.IntRange(min=1), default=None)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Also write the runs as CSV.")
@format_option
@handled
def ablate(
    config_path: Optional[str],
    data: str,
    seeds: Sequence[int],
    epochs: Optional[int],
    csv_path: Optional[str],
    fmt: str,
) -> Dict[str, Any]:
    """Train and evaluate all eight module-flag combinations."""
    cfg = _train_config(config_path)
    table = run_ablation(cfg, load_dataset(data), seeds=tuple(seeds) or (0,), epochs=epochs)
    if csv_path:
        table.to_csv(csv_path, index=False)
    return {"runs": frame_records(table), "summary": frame_records(summarize_ablation(table))}


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--ckpt", type=click.Path(dir_okay=False), default=None, help="Report a checkpoint's model instead.")
@click.option("--size", type=click.IntRange(min=32), default=64, show_default=True)
@click.option("--throughput", "iterations", type=click.IntRange(min=0), default=0, help="Timed forward passes; 0 skips.")
@format_option
@handled
def cost(config_path: Optional[str], ckpt: Optional[str], size: int, iterations: int, fmt: str) -> Dict[str, Any]:
    """Parameters, multiply-adds and weight size of one fused model."""
    if ckpt:
        model = model_from_checkpoint(load_checkpoint(ckpt), dtype=torch.float32)
    else:
        model_cfg: ModelConfig = _train_config(config_path).model
        model = CployoDetector(model_cfg)
        model.fuse()
    shape = (1, model.cfg.in_ch, size, size)
    report = profile_cost(model, shape)
    result: Dict[str, Any] = {"input": list(shape), **report.to_dict()}
    result["unfused_params"] = count_params(CployoDetector(model.cfg))
    if iterations:
        result["images_per_second"] = measure_throughput(model, shape, iterations=iterations)
    return result


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Console entry point: configure logging, then run the group."""
    settings.configure_logging()
    cli.main(args=list(argv) if argv is not None else None, prog_name="cployo")
