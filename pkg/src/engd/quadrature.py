"""Deterministic grids and quadrature: uniform tensor grids, boundary traces,
trapezoidal rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid1D",
    "grid1d",
    "trapezoid_integrate",
    "tensor_grid",
    "boundary_grid",
    "tensor_grid_with_boundary",
]

Rectangle = tuple[tuple[float, float], tuple[float, float]]

UNIT_SQUARE: Rectangle = ((0.0, 1.0), (0.0, 1.0))


@dataclass(frozen=True)
class Grid1D:
    a: float
    b: float
    n: int
    points: np.ndarray  # equi-spaced, endpoints included, strictly increasing
    weights: np.ndarray  # trapezoidal


def grid1d(a: float, b: float, n: int) -> Grid1D:
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    if not b > a:
        raise ValueError(f"degenerate interval [{a}, {b}]")
    points = np.linspace(a, b, n)
    h = (b - a) / (n - 1)
    weights = np.full(n, h)
    weights[0] = weights[-1] = h / 2
    return Grid1D(a, b, n, points, weights)


def trapezoid_integrate(grid: Grid1D, values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} values, got shape {values.shape}")
    return float(grid.weights @ values)


def _interior_axis(n: int, lo: float, hi: float) -> np.ndarray:
    # strict-interior uniform placement: x_i = lo + i * (hi - lo) / (n + 1)
    return lo + (hi - lo) * np.arange(1, n + 1) / (n + 1)


def tensor_grid(nx: int, ny: int, domain: Rectangle = UNIT_SQUARE):
    """Uniform interior tensor grid on a rectangle with uniform weights.

    Points avoid the boundary; weights sum to the rectangle area.
    """
    (x0, x1), (y0, y1) = domain
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must be at least 2")
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {domain}")
    xs = _interior_axis(nx, x0, x1)
    ys = _interior_axis(ny, y0, y1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.stack([gx.ravel(), gy.ravel()], axis=1)
    area = (x1 - x0) * (y1 - y0)
    weights = np.full(nx * ny, area / (nx * ny))
    return points, weights


def boundary_grid(n_per_edge: int, domain: Rectangle = UNIT_SQUARE) -> np.ndarray:
    """Equi-spaced walk along the rectangle perimeter; corners counted once.

    Returns 4 * n_per_edge points.
    """
    if n_per_edge < 1:
        raise ValueError("n_per_edge must be at least 1")
    (x0, x1), (y0, y1) = domain
    n = n_per_edge
    tx = np.linspace(x0, x1, n, endpoint=False)
    ty = np.linspace(y0, y1, n, endpoint=False)
    bottom = np.stack([tx, np.full(n, y0)], axis=1)
    right = np.stack([np.full(n, x1), ty], axis=1)
    top = np.stack([x1 + x0 - tx, np.full(n, y1)], axis=1)
    left = np.stack([np.full(n, x0), y1 + y0 - ty], axis=1)
    return np.concatenate([bottom, right, top, left], axis=0)


def tensor_grid_with_boundary(nx: int, ny: int, domain: Rectangle = UNIT_SQUARE):
    """Full tensor grid including the boundary with product trapezoid weights.

    Used for error quadrature, not for collocation.
    """
    (x0, x1), (y0, y1) = domain
    gx = grid1d(x0, x1, nx)
    gy = grid1d(y0, y1, ny)
    mx, my = np.meshgrid(gx.points, gy.points, indexing="ij")
    points = np.stack([mx.ravel(), my.ravel()], axis=1)
    weights = np.outer(gx.weights, gy.weights).ravel()
    return points, weights
