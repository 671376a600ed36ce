"""Region histograms, optimal region assignment and six-space fusion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .partition import RegionLabeling
from .poisson_features import CANONICAL_SPACES, FeatureSpaceConfig
from .rpca import DistinctnessField

N_BINS = 101
BIN_WIDTH = 0.01
FORBIDDEN = 1e9


@dataclass(frozen=True)
class RegionDescriptor:
    hist: np.ndarray
    area_ratio: float


@dataclass
class ShapeSignature:
    shape_id: str
    spaces: list[FeatureSpaceConfig]
    regions: list[list[RegionDescriptor]]
    category: str = ""


@dataclass
class DissimilarityMatrix:
    ids: list[str]
    fused: np.ndarray
    per_space: dict[str, np.ndarray] = field(default_factory=dict)


def bin_index(values) -> np.ndarray:
    """Bins [0, .01), ..., [.99, 1.0) and a last bin holding exactly 1.0."""
    values = np.asarray(values, dtype=float)
    idx = np.floor(values / BIN_WIDTH).astype(np.int64)
    idx = np.clip(idx, 0, N_BINS - 2)
    idx[values >= 1.0] = N_BINS - 1
    return idx


def describe_regions(labeling: RegionLabeling, field: DistinctnessField) -> list[RegionDescriptor]:
    labels = labeling.labels_at(field.pixel_index)
    bins = bin_index(field.normalized)
    total = len(labels)
    out = []
    for region in range(1, labeling.region_count + 1):
        sel = labels == region
        counts = np.bincount(bins[sel], minlength=N_BINS)
        out.append(RegionDescriptor(hist=counts / total, area_ratio=int(sel.sum()) / total))
    return out


def region_match_cost(a: RegionDescriptor, b: RegionDescriptor) -> float:
    return float(np.abs(a.hist - b.hist).sum())


def unmatched_cost(a: RegionDescriptor) -> float:
    return a.area_ratio


def assignment_instance(A: Sequence[RegionDescriptor], B: Sequence[RegionDescriptor]) -> np.ndarray:
    """Square (|A|+|B|) cost matrix with one dummy per region.

    Rows: A regions then B dummies. Columns: B regions then A dummies.
    """
    na, nb = len(A), len(B)
    C = np.zeros((na + nb, na + nb))
    HA = np.stack([a.hist for a in A])
    HB = np.stack([b.hist for b in B])
    C[:na, :nb] = np.abs(HA[:, None, :] - HB[None, :, :]).sum(axis=-1)
    C[:na, nb:] = FORBIDDEN
    C[na:, :nb] = FORBIDDEN
    C[np.arange(na), nb + np.arange(na)] = [unmatched_cost(a) for a in A]
    C[na + np.arange(nb), np.arange(nb)] = [unmatched_cost(b) for b in B]
    return C


def shape_dissimilarity_per_space(A: Sequence[RegionDescriptor], B: Sequence[RegionDescriptor]) -> float:
    """Cheapest partial one-to-one matching of regions; unmatched regions pay their area."""
    C = assignment_instance(A, B)
    rows, cols = linear_sum_assignment(C)
    return math.fsum(sorted(C[rows, cols].tolist()))


def check_canonical(spaces: Sequence[FeatureSpaceConfig]) -> None:
    if sorted(spaces, key=str) != sorted(CANONICAL_SPACES, key=str):
        raise ValueError(f"fusion needs the six canonical spaces, got {[str(s) for s in spaces]}")


def fuse(per_space: Sequence[float], spaces: Sequence[FeatureSpaceConfig] = CANONICAL_SPACES) -> float:
    check_canonical(spaces)
    return float(sum(float(Fraction(s.weight)) * d for s, d in zip(spaces, per_space)))


def build_dissimilarity_matrix(signatures: Sequence[ShapeSignature]) -> DissimilarityMatrix:
    n = len(signatures)
    spaces = signatures[0].spaces if n else list(CANONICAL_SPACES)
    check_canonical(spaces)
    for sig in signatures:
        if [str(s) for s in sig.spaces] != [str(s) for s in spaces]:
            raise ValueError(f"{sig.shape_id}: feature spaces differ from {signatures[0].shape_id}")
    per_space = {str(s): np.zeros((n, n)) for s in spaces}
    fused = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            ds = [shape_dissimilarity_per_space(signatures[i].regions[k], signatures[j].regions[k])
                  for k in range(len(spaces))]
            for s, d in zip(spaces, ds):
                per_space[str(s)][i, j] = per_space[str(s)][j, i] = d
            fused[i, j] = fused[j, i] = fuse(ds, spaces)
    return DissimilarityMatrix([s.shape_id for s in signatures], fused, per_space)
