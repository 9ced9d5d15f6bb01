"""
kanlayer.layer
~~~~~~~~~~~~~~

A Kolmogorov-Arnold layer: every edge (q, p) carries a learnable
univariate function

    phi_qp(x) = w_b[q, p] * silu(x) + w_s[q, p] * sum_i c[q, p, i] * B_i(x)

and output q is the sum of its edge functions over the inputs,
``y_q = sum_p phi_qp(x_p)``. The grid is fixed.
"""

import logging
import math
from typing import Union

import torch
import torch.nn.functional as F
from torch import nn

from cployo.errors import DataError

from .spline import bspline_basis, make_grid

log = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 8
DEFAULT_DEGREE = 3
DEFAULT_BOUND = 3.0


class KanDimensionError(DataError):
    """Raised when an input vector does not match a layer's ``in_dim``."""

    def __init__(self, expected, got, what: str = "layer inputs") -> None:
        self.expected = expected
        self.got = got
        super().__init__(f"KAN {what}: expected {expected}, got {got}")


class KanLayer(nn.Module):
    """Learnable spline activations on every input-output edge.

    Attributes:
        grid: knot buffer shared by all edges.
        spline_coeff: (out_dim, in_dim, G + k) coefficients c.
        base_weight: (out_dim, in_dim) weights w_b of the silu path.
        spline_weight: (out_dim, in_dim) scales w_s of the spline path.
    """

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        grid_size: int = DEFAULT_GRID_SIZE,
        degree: int = DEFAULT_DEGREE,
        bound: float = DEFAULT_BOUND,
    ) -> None:
        super().__init__()
        if in_dim < 1 or out_dim < 1:
            raise KanDimensionError(">= 1", (in_dim, out_dim), "layer dimensions")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.grid_size = grid_size
        self.degree = degree
        self.bound = bound
        self.register_buffer("grid", make_grid(grid_size, degree, bound))

        self.spline_coeff = nn.Parameter(torch.empty(out_dim, in_dim, grid_size + degree))
        self.base_weight = nn.Parameter(torch.empty(out_dim, in_dim))
        self.spline_weight = nn.Parameter(torch.empty(out_dim, in_dim))
        self.reset_parameters()

    def reset_parameters(self) -> None:
        """SiLU weights Kaiming-uniform, spline coefficients N(0, 0.1), spline scales 1."""
        nn.init.kaiming_uniform_(self.base_weight, a=math.sqrt(5))
        nn.init.normal_(self.spline_coeff, mean=0.0, std=0.1)
        nn.init.ones_(self.spline_weight)

    def extra_repr(self) -> str:
        return (
            f"in_dim={self.in_dim}, out_dim={self.out_dim}, grid_size={self.grid_size}, "
            f"degree={self.degree}, bound={self.bound}"
        )

    def basis(self, x: torch.Tensor) -> torch.Tensor:
        """B-spline basis of ``x`` on this layer's grid, shape ``(..., in_dim, G + k)``."""
        return bspline_basis(x, self.grid, self.degree)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """``y_q = sum_p base_qp * silu(x_p) + spline_qp(x_p)`` over the last axis.

        Raises:
            KanDimensionError: if the last axis of ``x`` is not ``in_dim``.
        """
        if x.shape[-1] != self.in_dim:
            raise KanDimensionError(self.in_dim, x.shape[-1])
        base = F.linear(F.silu(x), self.base_weight)
        scaled = self.spline_coeff * self.spline_weight.unsqueeze(-1)
        spline = torch.einsum("...pi,qpi->...q", self.basis(x), scaled)
        return base + spline


def kan_phi(x: Union[float, torch.Tensor], q: int, p: int, layer: KanLayer) -> torch.Tensor:
    """Evaluate the edge function phi_qp elementwise."""
    x = torch.as_tensor(x, dtype=layer.spline_coeff.dtype)
    spline = layer.basis(x) @ layer.spline_coeff[q, p]
    return layer.base_weight[q, p] * F.silu(x) + layer.spline_weight[q, p] * spline


def kan_forward(x: torch.Tensor, layer: KanLayer) -> torch.Tensor:
    """y_q = sum_p phi_qp(x_p) over the last axis of ``x``.

    Raises:
        KanDimensionError: if ``x.shape[-1] != layer.in_dim``.
    """
    return layer(x)
