"""Region partition of a shape from its distinctness field.

Pixels are split at the mean distinctness into a high and a low set. Pixels
are then visited in descending distinctness (row-major on ties); an unclaimed
pixel founds a patch and claims every unclaimed pixel of its own set inside a
disc of radius max(1, dist) around it. Adjacent patches of one set are merged
only when their seeds lie within the sum of their radii, which keeps regions
joined through thin necks apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rpca import DistinctnessField
from .shape_io import ShapeMask

_EPS = 1e-9


@dataclass
class RegionLabeling:
    label: np.ndarray  # grid, 0 off-shape, regions 1..region_count
    region_count: int
    high: np.ndarray  # (region_count,) bool, index i -> region i + 1

    def labels_at(self, pixel_index) -> np.ndarray:
        return self.label[pixel_index[:, 0], pixel_index[:, 1]]

    def areas(self) -> np.ndarray:
        return np.bincount(self.label.ravel(), minlength=self.region_count + 1)[1:]


def threshold_split(values) -> np.ndarray:
    """Boolean mask of pixels strictly above the mean value."""
    values = np.asarray(values, dtype=float)
    # exactly rounded sum, so the split does not depend on pixel order
    return values > math.fsum(values.ravel()) / values.size


def visit_order(values, pixel_index) -> np.ndarray:
    """Descending value, ties broken by row then column."""
    return np.lexsort((pixel_index[:, 1], pixel_index[:, 0], -np.asarray(values)))


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the earlier-founded patch as root
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def ordered_dilation_partition(mask: ShapeMask, field: DistinctnessField, dist: np.ndarray) -> RegionLabeling:
    grid = mask.grid
    h, w = grid.shape
    pix = field.pixel_index
    values = field.normalized

    set_grid = np.full((h, w), -1, dtype=np.int8)
    set_grid[pix[:, 0], pix[:, 1]] = threshold_split(values)
    patch = np.full((h, w), -1, dtype=np.int64)

    seeds = []
    radii = []
    for i in visit_order(values, pix):
        x, y = pix[i]
        if patch[x, y] >= 0:
            continue
        pid = len(seeds)
        r = max(1.0, float(dist[x, y]))
        seeds.append((x, y))
        radii.append(r)
        k = int(math.floor(r + _EPS))
        x0, x1 = max(0, x - k), min(h, x + k + 1)
        y0, y1 = max(0, y - k), min(w, y + k + 1)
        dx = np.arange(x0, x1)[:, None] - x
        dy = np.arange(y0, y1)[None, :] - y
        disc = dx * dx + dy * dy <= r * r + _EPS
        win_patch = patch[x0:x1, y0:y1]
        claim = disc & (set_grid[x0:x1, y0:y1] == set_grid[x, y]) & (win_patch < 0)
        win_patch[claim] = pid

    n = len(seeds)
    seeds_arr = np.asarray(seeds, dtype=float)
    radii_arr = np.asarray(radii)
    uf = _UnionFind(n)
    pairs = set()
    for a, b in ((patch[:, :-1], patch[:, 1:]), (patch[:-1, :], patch[1:, :])):
        ok = (a >= 0) & (b >= 0) & (a != b)
        for pa, pb in zip(a[ok].tolist(), b[ok].tolist()):
            pairs.add((min(pa, pb), max(pa, pb)))
    patch_set = np.empty(n, dtype=bool)
    for pid, (x, y) in enumerate(seeds):
        patch_set[pid] = set_grid[x, y] == 1
    for pa, pb in sorted(pairs):
        if patch_set[pa] != patch_set[pb]:
            continue
        d = float(np.hypot(*(seeds_arr[pa] - seeds_arr[pb])))
        if d <= radii_arr[pa] + radii_arr[pb] + _EPS:
            uf.union(pa, pb)

    roots = np.array([uf.find(p) for p in range(n)], dtype=np.int64)
    merged = np.where(patch >= 0, roots[np.maximum(patch, 0)], -1)
    root_ids, sizes = np.unique(merged[merged >= 0], return_counts=True)
    # largest first; equal sizes keep founding order
    order = sorted(range(len(root_ids)), key=lambda j: (-sizes[j], root_ids[j]))
    relabel = np.zeros(n, dtype=np.int64)
    high = np.zeros(len(order), dtype=bool)
    for new, j in enumerate(order, start=1):
        relabel[root_ids[j]] = new
        high[new - 1] = patch_set[root_ids[j]]
    label = np.where(merged >= 0, relabel[np.maximum(merged, 0)], 0)
    return RegionLabeling(label=label, region_count=len(order), high=high)
