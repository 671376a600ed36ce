"""Rasterized synthetic shapes: thick polylines, crosses and articulated families."""

from __future__ import annotations

import math

import numpy as np

from .shape_io import ShapeMask, crop

CATEGORIES = ("bar", "cross", "L", "T")


def rasterize_segments(segments, width, pad: int = 2) -> np.ndarray:
    """Pixels whose centers lie within width/2 of any segment ((x0, y0), (x1, y1)).

    ``width`` is a scalar or one width per segment.
    """
    pts = np.array([p for seg in segments for p in seg], dtype=float)
    widths = np.broadcast_to(np.asarray(width, dtype=float), (len(segments),))
    lo = np.floor(pts.min(axis=0) - widths.max() / 2) - pad
    hi = np.ceil(pts.max(axis=0) + widths.max() / 2) + pad
    xs = np.arange(lo[0], hi[0] + 1)
    ys = np.arange(lo[1], hi[1] + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    grid = np.zeros(X.shape, dtype=bool)
    for ((x0, y0), (x1, y1)), w in zip(segments, widths):
        half = w / 2.0
        dx, dy = x1 - x0, y1 - y0
        L2 = dx * dx + dy * dy
        if L2 == 0:
            t = np.zeros_like(X)
        else:
            t = np.clip(((X - x0) * dx + (Y - y0) * dy) / L2, 0.0, 1.0)
        d2 = (X - x0 - t * dx) ** 2 + (Y - y0 - t * dy) ** 2
        grid |= d2 <= half * half
    return crop(grid)


def cross_with_labels(body: int = 11, limb_length: int = 14, limb_width: int = 3):
    """Plus-shaped mask: a square body with four thin limbs.

    Returns (mask, limb) where ``limb`` marks the limb pixels on the grid.
    """
    n = body + 2 * limb_length
    grid = np.zeros((n, n), dtype=bool)
    limb = np.zeros_like(grid)
    b0, b1 = limb_length, limb_length + body
    grid[b0:b1, b0:b1] = True
    c0 = limb_length + (body - limb_width) // 2
    c1 = c0 + limb_width
    limb[:b0, c0:c1] = True
    limb[b1:, c0:c1] = True
    limb[c0:c1, :b0] = True
    limb[c0:c1, b1:] = True
    grid |= limb
    return ShapeMask("cross", crop(grid)), limb


def _rot(angle):
    return np.array([math.cos(angle), math.sin(angle)])


def articulated_shape(category: str, rng: np.random.Generator, arm: float = 30.0, width: float = 11.0,
                      jitter_deg: float = 15.0, free_rotation: bool = False, body: float = 0.0) -> np.ndarray:
    """One random member of a category.

    Arm lengths vary by +-15% and limb angles by ``jitter_deg``. The whole
    figure takes a random 90-degree pose and mirror, or any angle when
    ``free_rotation`` is set. A positive ``body`` adds a disk of that
    diameter at the joint of the limbs.
    """
    if free_rotation:
        base = rng.uniform(0, 2 * math.pi)
    else:
        base = rng.integers(4) * math.pi / 2

    def length():
        return arm * rng.uniform(0.85, 1.15)

    def jit():
        return math.radians(rng.uniform(-jitter_deg, jitter_deg))

    o = np.zeros(2)
    if category == "bar":
        d = _rot(base)
        segs = [(o - length() * d, o + length() * d)]
    elif category == "cross":
        d1, d2 = _rot(base), _rot(base + math.pi / 2 + jit())
        segs = [(o - length() * d1, o + length() * d1), (o - length() * d2, o + length() * d2)]
    elif category == "L":
        segs = [(o, o + 1.4 * length() * _rot(base)), (o, o + 1.4 * length() * _rot(base + math.pi / 2 + jit()))]
    elif category == "T":
        d = _rot(base)
        segs = [(o - length() * d, o + length() * d), (o, o + 1.4 * length() * _rot(base + math.pi / 2 + jit()))]
    else:
        raise ValueError(f"unknown category {category!r}")
    widths = [width] * len(segs)
    if body > 0 and category != "bar":
        segs.append((o, o))
        widths.append(body)
    grid = rasterize_segments([(tuple(a), tuple(b)) for a, b in segs], widths)
    if not free_rotation and rng.integers(2):
        grid = grid[:, ::-1]
    return grid


def articulated_dataset(seed: int, per_category: int = 5, categories=CATEGORIES, **kw) -> list[ShapeMask]:
    rng = np.random.default_rng(seed)
    masks = []
    for cat in categories:
        for i in range(per_category):
            grid = articulated_shape(cat, rng, **kw)
            masks.append(ShapeMask(f"{cat}{i:02d}", grid, cat))
    return masks
