"""
backbone.cost
~~~~~~~~~~~~~

Inference cost of a model: parameter count, multiply-adds of one
forward pass and float32 weight size, plus a measured throughput.
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Any, Dict, Sequence

import torch
from torch import nn
from torch.utils.flop_counter import FlopCounterMode

log = logging.getLogger(__name__)

BYTES_PER_MB = 1024 * 1024


@dataclass
class CostReport:
    """Parameter count, multiply-adds of one forward pass and float32 weight size."""

    params: int
    mults_adds: int
    weights_mb: float

    def to_dict(self) -> Dict[str, Any]:
        """Report as a plain dict."""
        return asdict(self)


def count_params(model: nn.Module) -> int:
    """Number of scalar parameters in ``model``."""
    return sum(p.numel() for p in model.parameters())


def profile_cost(model: nn.Module, input_shape: Sequence[int]) -> CostReport:
    """Count parameters and the multiply-adds of one eval-mode forward pass."""
    was_training = model.training
    model.eval()
    dtype = next(model.parameters()).dtype
    x = torch.zeros(*input_shape, dtype=dtype)
    with torch.no_grad(), FlopCounterMode(display=False) as counter:
        model(x)
    model.train(was_training)

    params = count_params(model)
    report = CostReport(
        params=params,
        mults_adds=int(counter.get_total_flops()) // 2,
        weights_mb=round(params * 4 / BYTES_PER_MB, 4),
    )
    log.info("Cost of %s at %s: %s", type(model).__name__, tuple(input_shape), report.to_dict())
    return report


def measure_throughput(
    model: nn.Module, input_shape: Sequence[int], iterations: int = 10, warmup: int = 2
) -> float:
    """Images per second of eval-mode inference on random input."""
    was_training = model.training
    model.eval()
    dtype = next(model.parameters()).dtype
    x = torch.randn(*input_shape, dtype=dtype)
    with torch.no_grad():
        for _ in range(warmup):
            model(x)
        start = time.perf_counter()
        for _ in range(iterations):
            model(x)
        elapsed = time.perf_counter() - start
    model.train(was_training)
    rate = iterations * input_shape[0] / max(elapsed, 1e-9)
    log.info("Throughput of %s: %.1f images/s", type(model).__name__, rate)
    return rate
