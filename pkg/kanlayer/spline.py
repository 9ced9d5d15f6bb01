"""
kanlayer.spline
~~~~~~~~~~~~~~~

Uniform knot grids and B-spline bases evaluated with the Cox-de Boor
recursion.

A grid for ``G`` intervals of degree ``k`` over ``[-bound, bound]`` has
``G + 2k + 1`` knots: the ``G + 1`` interior knots plus ``k`` extension
knots on each side, so that ``G + k`` basis functions of degree ``k``
cover the interior and sum to one on it.
"""

import torch


def make_grid(grid_size: int, degree: int, bound: float, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Return the extended uniform knot vector."""
    if grid_size < 1 or degree < 0 or bound <= 0:
        raise ValueError(f"invalid grid: G={grid_size}, k={degree}, bound={bound}")
    step = 2.0 * bound / grid_size
    return torch.arange(-degree, grid_size + degree + 1, dtype=dtype) * step - bound


def bspline_basis(x: torch.Tensor, grid: torch.Tensor, degree: int) -> torch.Tensor:
    """Evaluate every basis function at every point.

    Points are clamped to ``[grid[k], grid[-k-1]]`` first. The degree-0
    indicators are half-open, except the last one which also contains
    the right end of the grid.

    Args:
        x: points, any shape.
        grid: knot vector from :func:`make_grid`.
        degree: spline degree k.

    Returns:
        tensor of shape ``x.shape + (len(grid) - 1 - degree,)``.
    """
    grid = grid.to(x.dtype)
    lo = grid[degree]
    hi = grid[grid.numel() - 1 - degree]
    x = torch.clamp(x, min=lo.item(), max=hi.item()).unsqueeze(-1)

    left, right = grid[:-1], grid[1:]
    bases = ((x >= left) & (x < right)).to(x.dtype)
    last = (x[..., 0] == grid[-1]).to(x.dtype)
    bases[..., -1] = torch.maximum(bases[..., -1], last)

    for d in range(1, degree + 1):
        rising = (x - grid[: -(d + 1)]) / (grid[d:-1] - grid[: -(d + 1)])
        falling = (grid[d + 1 :] - x) / (grid[d + 1 :] - grid[1:-d])
        bases = rising * bases[..., :-1] + falling * bases[..., 1:]
    return bases
