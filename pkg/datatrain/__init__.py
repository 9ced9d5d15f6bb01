"""
datatrain
~~~~~~~~~

Synthetic data, dataset and label formats, the detector assembly,
training, fine-tuning, checkpoints, evaluation and the ablation sweep.
"""

from .checkpoint import (FORMAT_VERSION, Checkpoint, CheckpointFormatError,
                         CheckpointVersionError, load_checkpoint,
                         restore_state, save_checkpoint)
from .config import (ConfigError, LrSchedule, ModelConfig, Optimizer,
                     SyntheticSpec, TrainConfig, dump_config, load_config)
from .dataset import (Batch, DatasetError, NoduleDataset, Sample, collate,
                      hflip, iterate_batches, load_dataset)
from .enhance import EnhancementType, EnhancerFactory, segment_lungs
from .evaluation import (FuseReport, evaluate_checkpoint, fuse_checkpoint,
                         model_from_checkpoint, predict, run_ablation,
                         summarize_ablation)
from .labels import LabelFormatError, read_labels, write_labels
from .model import CployoDetector
from .synthetic import generate_synthetic
from .trainer import (BaseAbstractTrainer, DetectorTrainer, FinetuneTrainer,
                      LoadReport, NonFiniteLossError, finetune, train)

__all__ = [
    "BaseAbstractTrainer",
    "Batch",
    "Checkpoint",
    "CheckpointFormatError",
    "CheckpointVersionError",
    "ConfigError",
    "CployoDetector",
    "DatasetError",
    "DetectorTrainer",
    "EnhancementType",
    "EnhancerFactory",
    "FORMAT_VERSION",
    "FinetuneTrainer",
    "FuseReport",
    "LabelFormatError",
    "LoadReport",
    "LrSchedule",
    "ModelConfig",
    "NoduleDataset",
    "NonFiniteLossError",
    "Optimizer",
    "Sample",
    "SyntheticSpec",
    "TrainConfig",
    "collate",
    "dump_config",
    "evaluate_checkpoint",
    "finetune",
    "fuse_checkpoint",
    "generate_synthetic",
    "hflip",
    "iterate_batches",
    "load_checkpoint",
    "load_config",
    "load_dataset",
    "model_from_checkpoint",
    "predict",
    "read_labels",
    "restore_state",
    "run_ablation",
    "save_checkpoint",
    "segment_lungs",
    "summarize_ablation",
    "train",
    "write_labels",
]
