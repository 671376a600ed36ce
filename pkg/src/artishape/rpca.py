"""Robust PCA by inexact augmented Lagrange multipliers, and pixel distinctness."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class RpcaResult:
    L: np.ndarray
    S: np.ndarray
    iterations: int
    final_residual: float
    converged: bool


@dataclass
class DistinctnessField:
    pixel_index: np.ndarray  # (m, 2) row-major coordinates
    raw: np.ndarray
    normalized: np.ndarray

    def to_grid(self, shape, values=None) -> np.ndarray:
        out = np.zeros(shape)
        v = self.normalized if values is None else values
        out[self.pixel_index[:, 0], self.pixel_index[:, 1]] = v
        return out


def shrink(M, tau: float) -> np.ndarray:
    """Entrywise soft threshold sign(x) * max(|x| - tau, 0)."""
    M = np.asarray(M, dtype=float)
    return np.maximum(M - tau, 0) + np.minimum(M + tau, 0)


def svt(M, tau: float) -> np.ndarray:
    """Singular value thresholding U shrink(sigma, tau) V^T."""
    U, s, Vt = np.linalg.svd(np.asarray(M, dtype=float), full_matrices=False)
    s = s - tau
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vt[keep]


def rpca_ialm(D, lam: float | None = None, tol: float = 1e-7, max_iter: int = 1000,
              rho: float = 1.5) -> RpcaResult:
    """Split ``D`` into low-rank ``L`` plus sparse ``S``.

    Minimizes ||L||_* + lam ||S||_1 subject to L + S = D. Initialization and
    the penalty schedule (mu0 = 1.25 / ||D||_2, growth 1.5, cap mu0 * 1e7)
    follow the usual inexact-ALM reference settings. ``lam`` defaults to
    1 / sqrt(m).
    """
    D = np.asarray(D, dtype=float)
    m = D.shape[0]
    if lam is None:
        lam = 1.0 / np.sqrt(m)
    d_norm = np.linalg.norm(D)
    L = np.zeros_like(D)
    S = np.zeros_like(D)
    if d_norm == 0:
        return RpcaResult(L, S, 0, 0.0, True)

    norm_two = np.linalg.norm(D, 2)
    Y = D / max(norm_two, np.abs(D).max() / lam)
    mu = 1.25 / norm_two
    mu_max = mu * 1e7

    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        S = shrink(D - L + Y / mu, lam / mu)
        L = svt(D - S + Y / mu, 1.0 / mu)
        Z = D - L - S
        Y = Y + mu * Z
        mu = min(mu * rho, mu_max)
        residual = np.linalg.norm(Z) / d_norm
        if residual < tol:
            return RpcaResult(L, S, it, float(residual), True)
    warnings.warn(f"RPCA stopped at max_iter={max_iter} with residual {residual:.3g}")
    return RpcaResult(L, S, it, float(residual), False)


def objective(L, S, lam) -> float:
    return float(np.linalg.svd(L, compute_uv=False).sum() + lam * np.abs(S).sum())


def distinctness(S, pixel_index) -> DistinctnessField:
    """Per-pixel Euclidean norm of the rows of ``S``, plus a max-normalized copy."""
    S = np.asarray(S, dtype=float)
    pixel_index = np.asarray(pixel_index)
    if S.shape[0] != len(pixel_index):
        raise ValueError(f"{S.shape[0]} rows but {len(pixel_index)} pixels")
    raw = np.sqrt(np.einsum("ij,ij->i", S, S))
    top = raw.max() if raw.size else 0.0
    normalized = raw / top if top > 0 else np.zeros_like(raw)
    return DistinctnessField(pixel_index, raw, normalized)
