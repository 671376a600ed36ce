"""Distance transform, body thickness R and boundary geodesic extent G."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.csgraph import dijkstra

from .shape_io import ShapeMask

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ShapeMeasurements:
    R: float
    G: float


def distance_transform(mask: ShapeMask) -> np.ndarray:
    """Exact Euclidean distance from each shape pixel to the nearest background
    pixel center, with everything off-grid counted as background.

    Returns a grid-shaped array that is zero off the shape.
    """
    padded = np.pad(mask.grid, 1)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def compute_R(dist: np.ndarray) -> float:
    return float(dist.max())


def boundary_mask(grid: np.ndarray) -> np.ndarray:
    padded = np.pad(grid, 1)
    inner = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    return grid & ~inner


def boundary_pixels(mask: ShapeMask) -> np.ndarray:
    """(B, 2) coordinates of shape pixels touching the outside, row-major."""
    return np.argwhere(boundary_mask(mask.grid))


def pixel_graph(grid: np.ndarray) -> tuple[sparse.csr_matrix, np.ndarray]:
    """8-connected pixel graph with unit axial and sqrt(2) diagonal edges.

    Returns the adjacency matrix and an index grid mapping pixels to nodes
    (-1 off-shape). Nodes are numbered in row-major order.
    """
    index = np.full(grid.shape, -1, dtype=np.int64)
    index[grid] = np.arange(int(grid.sum()))
    padded = np.pad(index, 1, constant_values=-1)
    h, w = grid.shape
    rows, cols, weights = [], [], []
    for dx, dy, wt in ((0, 1, 1.0), (1, 0, 1.0), (1, 1, SQRT2), (1, -1, SQRT2)):
        src = padded[1:h + 1, 1:w + 1]
        dst = padded[1 + dx:h + 1 + dx, 1 + dy:w + 1 + dy]
        ok = (src >= 0) & (dst >= 0)
        rows.append(src[ok])
        cols.append(dst[ok])
        weights.append(np.full(int(ok.sum()), wt))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    wts = np.concatenate(weights)
    n = int(grid.sum())
    adj = sparse.csr_matrix((np.concatenate([wts, wts]), (np.concatenate([r, c]), np.concatenate([c, r]))),
                            shape=(n, n))
    return adj, index


def compute_G(mask: ShapeMask, sample_cap: int = 512, chunk: int = 64) -> float:
    """Largest shortest-path distance between boundary pixels through the shape.

    With more than ``sample_cap`` boundary pixels only every
    ceil(B / sample_cap)-th one (row-major) is used as a source; all boundary
    pixels stay targets, so the sampled value is a lower bound.
    """
    if sample_cap < 1:
        raise ValueError("sample_cap must be positive")
    adj, index = pixel_graph(mask.grid)
    bpix = boundary_pixels(mask)
    targets = index[bpix[:, 0], bpix[:, 1]]
    stride = max(1, math.ceil(len(targets) / sample_cap))
    sources = targets[::stride]
    best = 0.0
    for start in range(0, len(sources), chunk):
        d = dijkstra(adj, directed=False, indices=sources[start:start + chunk])
        best = max(best, float(d[:, targets].max()))
    return best


def measure(mask: ShapeMask, sample_cap: int = 512) -> ShapeMeasurements:
    return ShapeMeasurements(R=compute_R(distance_transform(mask)), G=compute_G(mask, sample_cap))
