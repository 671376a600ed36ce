"""Per-pixel multi-scale screened-Poisson features.

For each interaction scale rho the shape pixels solve

    (4 rho^2 + 1) u_p - rho^2 * sum_{q in N4(p) inside shape} u_q = rho^2,

i.e. u_p = rho^2 / (4 rho^2 + 1) * (1 + sum of the four neighbours) with
pixels outside the shape held at zero. Each solution is divided by its maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import sparse

from .geometry import ShapeMeasurements, measure
from .shape_io import ShapeMask

N_FEATURES = 30


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class FeatureSpaceConfig:
    kind: str  # "R" or "G"
    multiplier: Fraction

    def __post_init__(self):
        if self.kind not in ("R", "G"):
            raise ValueError(f"kind must be 'R' or 'G', got {self.kind!r}")
        object.__setattr__(self, "multiplier", Fraction(self.multiplier))
        if self.multiplier <= 0:
            raise ValueError("multiplier must be positive")

    @property
    def name(self) -> str:
        mul = self.multiplier
        if self.kind == "R":
            return f"{mul}R" if mul.denominator == 1 else f"{mul.numerator}R{mul.denominator}"
        # G-space multipliers are written unreduced as 2/k, e.g. 2/4 -> "2G4"
        if (2 / mul).denominator == 1:
            return f"2G{int(2 / mul)}"
        return f"{mul.numerator}G{mul.denominator}"

    @property
    def weight(self) -> Fraction:
        return Fraction(1, 4) if self.kind == "R" else Fraction(1, 12)

    def rho_star(self, meas: ShapeMeasurements) -> float:
        # G is 0 only for a single pixel; flooring at R keeps rho_star > 0
        base = meas.R if self.kind == "R" else max(meas.G, meas.R)
        return float(self.multiplier) * base

    @classmethod
    def parse(cls, name: str) -> "FeatureSpaceConfig":
        """Parse names such as ``3R``, ``2G3`` (= 2/3 G) or ``0.5G``."""
        s = name.strip()
        for kind in ("R", "G"):
            if kind in s:
                num, _, den = s.partition(kind)
                mul = Fraction(num or "1")
                if den:
                    mul /= Fraction(den)
                return cls(kind, mul)
        raise ValueError(f"cannot parse feature space {name!r}")

    def __str__(self):
        return self.name


CANONICAL_SPACES = (
    FeatureSpaceConfig("R", Fraction(2)),
    FeatureSpaceConfig("R", Fraction(3)),
    FeatureSpaceConfig("R", Fraction(4)),
    FeatureSpaceConfig("G", Fraction(2, 3)),
    FeatureSpaceConfig("G", Fraction(2, 4)),
    FeatureSpaceConfig("G", Fraction(2, 5)),
)


def rho_schedule(rho_star: float) -> np.ndarray:
    if not rho_star > 0:
        raise ValueError(f"rho_star must be positive, got {rho_star}")
    return np.arange(1, N_FEATURES + 1) * rho_star / N_FEATURES


def neighbour_matrix(grid: np.ndarray) -> sparse.csr_matrix:
    """Symmetric 0/1 adjacency of 4-neighbouring shape pixels (row-major nodes)."""
    index = np.full(grid.shape, -1, dtype=np.int64)
    n = int(grid.sum())
    index[grid] = np.arange(n)
    rows, cols = [], []
    for a, b in ((index[:, :-1], index[:, 1:]), (index[:-1, :], index[1:, :])):
        ok = (a >= 0) & (b >= 0)
        rows.append(a[ok])
        cols.append(b[ok])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    data = np.ones(2 * len(r))
    return sparse.csr_matrix((data, (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(n, n))


def screened_poisson_system(nbr: sparse.csr_matrix, rho: float):
    n = nbr.shape[0]
    rho2 = rho * rho
    A = (sparse.identity(n, format="csr") * (4 * rho2 + 1) - nbr * rho2).tocsr()
    b = np.full(n, rho2)
    return A, b


def pcg(A, b, tol=1e-8, maxiter=None):
    """Jacobi-preconditioned conjugate gradients for SPD ``A``.

    Stops on relative residual ||b - Ax|| / ||b|| <= tol, checked against the
    true residual before returning.
    """
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    inv_diag = 1.0 / A.diagonal()
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0:
        return x, 0
    it = 0
    while it < maxiter:
        r = b - A @ x
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        while it < maxiter:
            it += 1
            Ap = A @ p
            alpha = rz / (p @ Ap)
            x += alpha * p
            r -= alpha * Ap
            if np.linalg.norm(r) <= tol * bnorm:
                break
            z = inv_diag * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
    if np.linalg.norm(b - A @ x) <= tol * bnorm:
        return x, it
    raise ConvergenceError(f"CG did not reach relative residual {tol} in {maxiter} iterations")


def solve_screened_poisson(mask: ShapeMask, rho: float, tol: float = 1e-8, nbr=None) -> np.ndarray:
    """Per-pixel solution ``u`` (length m, row-major pixel order)."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if nbr is None:
        nbr = neighbour_matrix(mask.grid)
    A, b = screened_poisson_system(nbr, rho)
    u, _ = pcg(A, b, tol=tol)
    return u


def normalize_features(u: np.ndarray) -> np.ndarray:
    top = np.max(u)
    if not top > 0:
        raise ValueError("cannot normalize a feature with nonpositive maximum")
    return u / top


@dataclass(frozen=True)
class FeatureMatrix:
    shape_id: str
    space: FeatureSpaceConfig
    rho_star: float
    pixel_index: np.ndarray
    D: np.ndarray


def feature_matrix(mask: ShapeMask, rho_star: float, tol: float = 1e-8) -> np.ndarray:
    """m x 30 matrix; column k holds the normalized solution at rho_k."""
    nbr = neighbour_matrix(mask.grid)
    cols = [normalize_features(solve_screened_poisson(mask, rho, tol, nbr)) for rho in rho_schedule(rho_star)]
    return np.column_stack(cols)


def build_feature_matrix(mask: ShapeMask, space: FeatureSpaceConfig,
                         meas: ShapeMeasurements | None = None, tol: float = 1e-8) -> FeatureMatrix:
    if meas is None:
        meas = measure(mask)
    rho_star = space.rho_star(meas)
    D = feature_matrix(mask, rho_star, tol)
    return FeatureMatrix(mask.id, space, rho_star, mask.pixel_index(), D)


def write_feature_binary(D: np.ndarray, path) -> None:
    """Little-endian (m, 30) uint64 header followed by row-major float64."""
    D = np.ascontiguousarray(D, dtype="<f8")
    Path(path).write_bytes(np.asarray(D.shape, dtype="<u8").tobytes() + D.tobytes())


def read_feature_binary(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m, k = np.frombuffer(data, dtype="<u8", count=2)
    return np.frombuffer(data, dtype="<f8", offset=16, count=int(m * k)).reshape(int(m), int(k)).copy()
