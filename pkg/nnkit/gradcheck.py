"""
nnkit.gradcheck
~~~~~~~~~~~~~~~

Finite-difference verification of analytic gradients.

The block runs in double precision on a seeded random input. Its
outputs are reduced to a scalar with fixed random weights (a plain sum
would make every gradient through a train-mode batch norm vanish), the
loss is backpropagated, and every input and parameter element (or a
seeded sample of them) is compared against a central difference.

A central difference is only trusted once a ten times finer step
confirms it. ReLU, max and clamp make the loss piecewise smooth, and a
step that straddles one of their kinks gives an estimate that changes
with the step; such elements are retried on finer steps and skipped
when no pair of consecutive steps agrees.
"""

import copy
import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import torch
from torch import nn

from .exceptions import NonFiniteGradientError

log = logging.getLogger(__name__)

DEFAULT_STEP = 1e-4
DENOMINATOR_FLOOR = 1e-8
# |a - n| below this is rounding noise of a gradient that is zero by
# construction, e.g. a bias feeding a train-mode batch norm.
NOISE_FLOOR = 1e-10
REFINEMENTS = 3
AGREEMENT_RTOL = 1e-5
AGREEMENT_ATOL = 1e-9

Block = Union[nn.Module, Callable[[torch.Tensor], object]]


def relative_error(analytic: float, numeric: float) -> float:
    """|a - n| / max(|a|, |n|, 1e-8), or 0 when |a - n| is under the noise floor."""
    diff = abs(analytic - numeric)
    if diff <= NOISE_FLOOR:
        return 0.0
    return diff / max(abs(analytic), abs(numeric), DENOMINATOR_FLOOR)


def steps_agree(coarse: float, fine: float) -> bool:
    """Whether two central differences agree to within rounding and truncation."""
    return abs(coarse - fine) <= AGREEMENT_RTOL * max(abs(coarse), abs(fine)) + AGREEMENT_ATOL


def numeric_derivative(
    loss: Callable[[], torch.Tensor], flat: torch.Tensor, index: int, step: float = DEFAULT_STEP
) -> Optional[float]:
    """Central difference of ``loss`` along one element of ``flat``.

    Starting at ``step``, the estimate is returned as soon as the next
    step (ten times finer) agrees with it. ``flat[index]`` is restored
    before returning.

    Returns:
        The derivative, or ``None`` when the loss has a kink closer to the
        element than the finest step tried.
    """
    original = flat[index].item()

    def central(h: float) -> float:
        """Central difference at step ``h``."""
        flat[index] = original + h
        plus = loss().item()
        flat[index] = original - h
        minus = loss().item()
        flat[index] = original
        return (plus - minus) / (2.0 * h)

    coarse = central(step)
    for _ in range(REFINEMENTS):
        step /= 10.0
        fine = central(step)
        if steps_agree(coarse, fine):
            return coarse
        coarse = fine
    return None


def _flatten_outputs(out: object) -> List[torch.Tensor]:
    if isinstance(out, torch.Tensor):
        return [out]
    if isinstance(out, dict):
        return [t for key in sorted(out) for t in _flatten_outputs(out[key])]
    if isinstance(out, (list, tuple)):
        return [t for item in out for t in _flatten_outputs(item)]
    raise TypeError(f"cannot reduce block output of type {type(out).__name__}")


def _indices(numel: int, samples: Optional[int], generator: torch.Generator) -> Iterable[int]:
    if samples is None or samples >= numel:
        return range(numel)
    return torch.randperm(numel, generator=generator)[:samples].tolist()


def grad_check(
    block: Block,
    input_shape: Sequence[int],
    seed: int = 0,
    step: float = DEFAULT_STEP,
    samples_per_tensor: Optional[int] = None,
    check_params: bool = True,
) -> float:
    """Return the max relative error between analytic and numeric gradients.

    Args:
        block: module or callable mapping a tensor to a tensor, a sequence
            of tensors or a dict of tensors. Modules are deep-copied and
            cast to double, so the caller's block is untouched.
        input_shape: shape of the random input.
        seed: seeds the input, the reduction weights and the sampling.
        step: first central-difference step.
        samples_per_tensor: compare only this many seeded random elements
            of each tensor; ``None`` checks all of them.
        check_params: also check parameter gradients.

    Raises:
        NonFiniteGradientError: if an analytic gradient is not finite.
    """
    generator = torch.Generator().manual_seed(seed)

    if isinstance(block, nn.Module):
        block = copy.deepcopy(block).to(torch.float64)
        named_params = list(block.named_parameters()) if check_params else []
    else:
        named_params = []

    x = torch.randn(*input_shape, generator=generator, dtype=torch.float64)
    x.requires_grad_(True)

    with torch.no_grad():
        outputs = _flatten_outputs(block(x))
    weights = []
    for out in outputs:
        w = torch.randn(out.shape, generator=generator, dtype=torch.float64)
        weights.append(w / math.sqrt(max(out.numel(), 1)))

    def loss() -> torch.Tensor:
        """Weighted sum of every block output."""
        return sum((w * y).sum() for w, y in zip(weights, _flatten_outputs(block(x))))

    for _, p in named_params:
        p.grad = None
    loss().backward()

    tensors: List[Tuple[str, torch.Tensor]] = [("input", x)] + named_params
    analytic: Dict[str, torch.Tensor] = {}
    for name, t in tensors:
        grad = t.grad if t.grad is not None else torch.zeros_like(t)
        if not torch.all(torch.isfinite(grad)):
            raise NonFiniteGradientError(name)
        analytic[name] = grad.detach().clone()

    worst, worst_name, skipped = 0.0, "", 0
    with torch.no_grad():
        for name, t in tensors:
            flat = t.data.view(-1)
            grad = analytic[name].view(-1)
            tensor_worst = 0.0
            for i in _indices(flat.numel(), samples_per_tensor, generator):
                numeric = numeric_derivative(loss, flat, i, step)
                if numeric is None:
                    log.debug("grad_check %s[%d]: kink within the finest step, skipped", name, i)
                    skipped += 1
                    continue
                tensor_worst = max(tensor_worst, relative_error(grad[i].item(), numeric))
            log.debug("grad_check %s: max relative error %.3e", name, tensor_worst)
            if tensor_worst > worst:
                worst, worst_name = tensor_worst, name

    if skipped:
        log.warning("grad_check seed=%d: %d element(s) skipped at kinks", seed, skipped)
    log.info("grad_check seed=%d: max relative error %.3e (%s)", seed, worst, worst_name or "-")
    return worst
