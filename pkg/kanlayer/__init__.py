"""
kanlayer
~~~~~~~~

Kolmogorov-Arnold layers with B-spline edge functions and the KAN
bottleneck used by the fusion neck.
"""

from .bottleneck import KanBottleneck, kan_bottleneck_forward
from .layer import (KanDimensionError, KanLayer, kan_forward, kan_phi)
from .spline import bspline_basis, make_grid

__all__ = [
    "KanBottleneck",
    "KanDimensionError",
    "KanLayer",
    "bspline_basis",
    "kan_bottleneck_forward",
    "kan_forward",
    "kan_phi",
    "make_grid",
]
