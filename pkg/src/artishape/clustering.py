"""Planar embedding (exact t-SNE), affinity propagation and NMI scoring."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class Embedding2D:
    ids: list[str]
    coords: np.ndarray
    kl: list[float] = field(default_factory=list)
    perplexity: float = float("nan")
    seed: int = 0


@dataclass
class ClusterAssignment:
    ids: list[str]
    cluster: np.ndarray  # 1..K
    exemplars: list[str]
    converged: bool = True
    exact_k: bool = True
    preference: float = float("nan")

    @property
    def k(self) -> int:
        return len(self.exemplars)


# --- t-SNE -------------------------------------------------------------------

def default_perplexity(n: int) -> float:
    return min(30.0, (n - 1) / 3.0)


def conditional_affinities(dist2: np.ndarray, perplexity: float, tol: float = 1e-5,
                           max_steps: int = 200) -> np.ndarray:
    """Row-stochastic Gaussian affinities, bandwidth bisected to hit ``perplexity``.

    ``dist2`` holds squared distances.
    """
    n = dist2.shape[0]
    target = math.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        d = np.delete(dist2[i], i)
        d = d - d.min()
        beta, lo, hi = 1.0, 0.0, math.inf
        for _ in range(max_steps):
            p = np.exp(-d * beta)
            sp = p.sum()
            H = math.log(sp) + beta * float(d @ p) / sp
            diff = H - target
            if abs(diff) <= tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2 if hi == math.inf else (beta + hi) / 2
            else:
                hi = beta
                beta = (beta + lo) / 2
        P[i, np.arange(n) != i] = p / sp
    return P


def kl_divergence(P, Q) -> float:
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne(dist, ids: Sequence[str] | None = None, perplexity: float | None = None, iters: int = 1000,
         seed: int = 42, learning_rate: float = 200.0, exaggeration: float = 12.0,
         exaggeration_iters: int = 250, momentum_switch: int = 250) -> Embedding2D:
    """Exact t-SNE on a precomputed dissimilarity matrix."""
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    ids = list(ids) if ids is not None else [str(i) for i in range(n)]
    if n < 4:
        raise ValueError(f"t-SNE needs at least 4 points, got {n}")
    if perplexity is None:
        perplexity = default_perplexity(n)
    if not 0 < perplexity <= n - 1:
        raise ValueError(f"perplexity {perplexity} infeasible for {n} points")

    P = conditional_affinities(dist ** 2, perplexity)
    P = (P + P.T) / (2 * n)
    P = np.maximum(P, 1e-12)

    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    step = np.zeros_like(Y)
    gains = np.ones_like(Y)
    kl = []
    for it in range(iters):
        Pe = P * exaggeration if it < exaggeration_iters else P
        momentum = 0.5 if it < momentum_switch else 0.8
        sq = np.sum(Y * Y, axis=1)
        num = 1.0 / (1.0 + sq[:, None] + sq[None, :] - 2.0 * Y @ Y.T)
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-12)
        W = (Pe - Q) * num
        grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
        same = (grad > 0) == (step > 0)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        step = momentum * step - learning_rate * gains * grad
        Y = Y + step
        Y = Y - Y.mean(axis=0)
        kl.append(kl_divergence(P, Q))
    return Embedding2D(ids, Y, kl, perplexity, seed)


# --- affinity propagation ------------------------------------------------------

def embedding_similarity(coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    return -np.sum(diff * diff, axis=-1)


def _assign(S: np.ndarray, exemplars: np.ndarray) -> np.ndarray:
    labels = np.argmax(S[:, exemplars], axis=1)
    labels[exemplars] = np.arange(len(exemplars))
    return labels


def affinity_propagation(sim, preference: float, ids: Sequence[str] | None = None, damping: float = 0.9,
                         max_iter: int = 1000, stable_window: int = 100) -> ClusterAssignment:
    """Responsibility/availability message passing on a similarity matrix."""
    S = np.array(sim, dtype=float)
    n = S.shape[0]
    ids = list(ids) if ids is not None else [str(i) for i in range(n)]
    np.fill_diagonal(S, preference)

    if n == 1:
        return ClusterAssignment(ids, np.ones(1, dtype=int), ids[:1], True, True, preference)
    off = S[~np.eye(n, dtype=bool)]
    if np.all(off == off[0]):
        # all similarities equal: messages are degenerate ties
        if preference > off[0]:
            return ClusterAssignment(ids, np.arange(1, n + 1), list(ids), True, True, preference)
        return ClusterAssignment(ids, np.ones(n, dtype=int), ids[:1], True, True, preference)

    # tiny fixed perturbation breaks exact ties between candidate exemplars
    noise = np.random.RandomState(0).standard_normal((n, n))
    S = S + (np.finfo(float).eps * S + np.finfo(float).tiny * 100) * noise

    R = np.zeros((n, n))
    A = np.zeros((n, n))
    rows = np.arange(n)
    last = None
    stable = 0
    converged = False
    for _ in range(max_iter):
        AS = A + S
        best = np.argmax(AS, axis=1)
        first = AS[rows, best]
        AS[rows, best] = -np.inf
        second = AS.max(axis=1)
        Rnew = S - first[:, None]
        Rnew[rows, best] = S[rows, best] - second
        R = damping * R + (1 - damping) * Rnew

        Rp = np.maximum(R, 0)
        Rp[rows, rows] = R[rows, rows]
        Anew = Rp.sum(axis=0)[None, :] - Rp
        dA = Anew[rows, rows].copy()
        Anew = np.minimum(Anew, 0)
        Anew[rows, rows] = dA
        A = damping * A + (1 - damping) * Anew

        E = (A[rows, rows] + R[rows, rows]) > 0
        if last is not None and np.array_equal(E, last):
            stable += 1
        else:
            stable = 0
        last = E
        if stable >= stable_window and E.any():
            converged = True
            break

    exemplars = np.flatnonzero(last)
    if exemplars.size == 0:
        exemplars = np.array([int(np.argmax(A[rows, rows] + R[rows, rows]))])
        converged = False
    labels = _assign(S, exemplars)
    return ClusterAssignment(ids, labels + 1, [ids[e] for e in exemplars], converged, True, preference)


def cluster_at_k(emb: Embedding2D, k: int, damping: float = 0.9, max_iter: int = 1000,
                 stable_window: int = 100, max_probes: int = 60) -> ClusterAssignment:
    """Bisect the shared AP preference until exactly ``k`` clusters appear.

    The bracket is [10 * min similarity, max off-diagonal similarity], widened
    to 0 when the upper end still yields fewer than ``k`` clusters. Falls back
    to the probe whose count is closest to ``k`` (smaller count on ties).
    """
    return cluster_similarity_at_k(embedding_similarity(emb.coords), emb.ids, k, damping, max_iter,
                                   stable_window, max_probes)


def cluster_similarity_at_k(S, ids: Sequence[str], k: int, damping: float = 0.9, max_iter: int = 1000,
                            stable_window: int = 100, max_probes: int = 60) -> ClusterAssignment:
    S = np.asarray(S, dtype=float)
    ids = list(ids)
    n = len(ids)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    if n == 1:
        return affinity_propagation(S, 0.0, ids)
    off = S[~np.eye(n, dtype=bool)]
    lo, hi = 10.0 * float(S.min()), float(off.max())

    probes = 0
    best = None

    def run(pref):
        nonlocal probes, best
        probes += 1
        res = affinity_propagation(S, pref, ids, damping, max_iter, stable_window)
        key = (abs(res.k - k), res.k)
        if best is None or key < (abs(best.k - k), best.k):
            best = res
        return res

    res_hi = run(hi)
    if res_hi.k < k and hi < 0:
        hi = 0.0
        res_hi = run(hi)
    if res_hi.k == k:
        return res_hi
    res_lo = run(lo)
    if res_lo.k == k:
        return res_lo
    while probes < max_probes:
        mid = 0.5 * (lo + hi)
        res = run(mid)
        if res.k == k:
            return res
        if res.k > k:
            hi = mid
        else:
            lo = mid
    log.warning("affinity propagation: no preference gave %d clusters; using %d", k, best.k)
    best.exact_k = False
    return best


# --- NMI -----------------------------------------------------------------------

def nmi_from_labels(clusters: Sequence, categories: Sequence) -> tuple[float, bool]:
    """Normalized mutual information 2 I / (H_clusters + H_categories).

    Returns (value, degenerate); a single cluster or single category gives
    (0.0, True).
    """
    if len(clusters) != len(categories):
        raise ValueError("partitions differ in length")
    N = len(clusters)
    joint = Counter(zip(clusters, categories))
    ni = Counter(clusters)
    nj = Counter(categories)
    if len(ni) < 2 or len(nj) < 2:
        return 0.0, True
    # ratios of integer counts keep P == P cases exact
    mi = 0.0
    for (i, j), nij in joint.items():
        mi += (nij / N) * math.log((nij * N) / (ni[i] * nj[j]))
    h_i = sum((c / N) * math.log(N / c) for c in ni.values())
    h_j = sum((c / N) * math.log(N / c) for c in nj.values())
    return 2.0 * mi / (h_i + h_j), False


def nmi(assignment: ClusterAssignment, categories: dict[str, str]) -> float:
    if set(assignment.ids) != set(categories):
        raise ValueError("cluster ids and category ids differ")
    labels = [categories[i] for i in assignment.ids]
    value, degenerate = nmi_from_labels(list(assignment.cluster), labels)
    if degenerate:
        log.warning("NMI undefined for a single cluster or category; reporting 0")
    return value
