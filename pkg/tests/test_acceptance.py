"""Acceptance criteria 1-10; each test records one PASS/FAIL/SKIP line."""

import itertools
import math
import os
import time
from fractions import Fraction

import numpy as np
import pytest

from artishape.clustering import nmi_from_labels
from artishape.matching import (N_BINS, RegionDescriptor, build_dissimilarity_matrix, fuse,
                                shape_dissimilarity_per_space)
from artishape.pipeline import PipelineConfig, embed_and_cluster, process_shapes, run_pipeline
from artishape.poisson_features import CANONICAL_SPACES, solve_screened_poisson
from artishape.rpca import rpca_ialm
from artishape.shape_io import mask_from_array
from artishape.synthetic import articulated_dataset
from conftest import ACCEPTANCE_LINES, write_manifest


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def dense_solve(grid, rho):
    pix = [tuple(p) for p in np.argwhere(grid)]
    index = {p: i for i, p in enumerate(pix)}
    A = np.zeros((len(pix), len(pix)))
    for (x, y), i in index.items():
        A[i, i] = 4 * rho ** 2 + 1
        for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if q in index:
                A[i, index[q]] = -rho ** 2
    return np.linalg.solve(A, np.full(len(pix), rho ** 2))


def random_walk_mask(rng, target):
    """4-connected by construction: a lattice walk inside a 24 x 24 box."""
    grid = np.zeros((24, 24), dtype=bool)
    x, y = 12, 12
    grid[x, y] = True
    while grid.sum() < target:
        dx, dy = ((1, 0), (-1, 0), (0, 1), (0, -1))[rng.integers(4)]
        x, y = min(max(x + dx, 0), 23), min(max(y + dy, 0), 23)
        grid[x, y] = True
    return mask_from_array(grid)


# --- 1 -----------------------------------------------------------------------------

DATASETS = [("56shapes", "ARTISHAPE_56SHAPES", 14, 1.0), ("180shapes", "ARTISHAPE_180SHAPES", 30, 0.93),
            ("1000shapes", "ARTISHAPE_1000SHAPES", 50, 0.87)]


@pytest.mark.parametrize("name, env, k, target", DATASETS, ids=[d[0] for d in DATASETS])
def test_c1_dataset_nmi(tmp_path, name, env, k, target):
    manifest = os.environ.get(env)
    if not manifest:
        ACCEPTANCE_LINES.append(f"criterion  1: SKIP  {name}: set {env} to its manifest to run")
        pytest.skip(f"{name} not supplied")
    cfg = PipelineConfig(manifest=manifest, out_dir=str(tmp_path / name), k=k).reference_defaults()
    t = time.perf_counter()
    report = run_pipeline(cfg)
    secs = time.perf_counter() - t
    value = report["NMI"] or 0.0
    ok = f"{value:.4f}" == "1.0000" if target == 1.0 else value >= target
    record(1, ok, f"{name}: NMI={value:.4f} (target {'= 1.0000' if target == 1.0 else f'>= {target}'}), "
                  f"{secs:.0f}s")


# --- 2 -----------------------------------------------------------------------------

def test_c2_pde_oracle():
    t = time.perf_counter()
    bar = mask_from_array(np.ones((1, 3)))
    bar_err = np.abs(solve_screened_poisson(bar, 1.0) - np.array([6, 7, 6]) / 23).max()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        mask = random_walk_mask(rng, int(rng.integers(20, 401)))
        rho = float(rng.uniform(0.3, 10))
        worst = max(worst, np.abs(solve_screened_poisson(mask, rho) - dense_solve(mask.grid, rho)).max())
    secs = time.perf_counter() - t
    record(2, bar_err <= 1e-8 and worst <= 1e-6 and secs <= 10,
           f"bar err {bar_err:.1e} (<= 1e-8), CG vs dense worst {worst:.1e} on 50 masks (<= 1e-6), {secs:.1f}s")


# --- 3 -----------------------------------------------------------------------------

def test_c3_maximum_principle_and_monotonicity():
    rng = np.random.default_rng(3)
    bounded = True
    for _ in range(30):
        mask = random_walk_mask(rng, int(rng.integers(1, 301)))
        for rho in (0.5, 1.0, 5.0, 20.0):
            u = solve_screened_poisson(mask, rho)
            bounded &= bool(np.all(u > 0) and np.all(u <= rho ** 2))
    monotone = True
    for L in (2, 5, 10):
        for rho in (0.5, 1.0, 5.0):
            # increments near the middle shrink like rho^-2k, so solve to machine precision
            u = solve_screened_poisson(mask_from_array(np.ones((1, 2 * L + 1))), rho, tol=1e-15)
            monotone &= bool(np.all(np.diff(u[:L + 1]) > 0) and np.all(np.diff(u[L:]) < 0))
            bounded &= bool(np.all(u > 0) and np.all(u <= rho ** 2))
    record(3, bounded and monotone, f"0 < u <= rho^2: {bounded}; strictly increasing to the middle: {monotone}")


# --- 4 -----------------------------------------------------------------------------

def low_rank_plus_sparse(seed):
    rng = np.random.default_rng(seed)
    L0 = rng.normal(size=(200, 2)) @ rng.normal(size=(2, 30))
    S0 = np.zeros((200, 30))
    support = rng.random((200, 30)) < 0.05
    S0[support] = 10 * rng.choice([-1, 1], support.sum())
    return L0, S0


def test_c4_rpca_recovery():
    t = time.perf_counter()
    recovered, worst_feas, errors = 0, 0.0, []
    for seed in range(20):
        L0, S0 = low_rank_plus_sparse(seed)
        D = L0 + S0
        res = rpca_ialm(D, 1 / math.sqrt(200))
        worst_feas = max(worst_feas, np.linalg.norm(D - res.L - res.S) / np.linalg.norm(D))
        err = np.linalg.norm(res.L - L0) / np.linalg.norm(L0)
        errors.append(err)
        recovered += err <= 1e-4
    secs = time.perf_counter() - t
    record(4, worst_feas <= 1e-7 and recovered >= 18 and secs <= 30,
           f"feasibility worst {worst_feas:.1e} (<= 1e-7); recovered {recovered}/20 (need 18; "
           f"median rel err {np.median(errors):.1e}); {secs:.1f}s")


# --- 5 -----------------------------------------------------------------------------

def brute_force(A, B):
    best = math.inf
    for k in range(min(len(A), len(B)) + 1):
        for rows in itertools.combinations(range(len(A)), k):
            for cols in itertools.permutations(range(len(B)), k):
                c = sum(float(np.abs(A[i].hist - B[j].hist).sum()) for i, j in zip(rows, cols))
                c += sum(A[i].area_ratio for i in range(len(A)) if i not in rows)
                c += sum(B[j].area_ratio for j in range(len(B)) if j not in cols)
                best = min(best, c)
    return best


def random_regions(rng, n):
    out = []
    for a in rng.dirichlet(np.ones(n)):
        h = rng.random(N_BINS) * (rng.random(N_BINS) < 0.1)
        h[rng.integers(N_BINS)] += 0.5
        out.append(RegionDescriptor(h / h.sum() * a, float(a)))
    return out


def test_c5_hungarian_oracle():
    t = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(500):
        total = int(rng.integers(2, 9))
        na = int(rng.integers(1, total))
        A, B = random_regions(rng, na), random_regions(rng, total - na)
        worst = max(worst, abs(shape_dissimilarity_per_space(A, B) - brute_force(A, B)))
    secs = time.perf_counter() - t
    record(5, worst <= 1e-12 and secs <= 10, f"500 instances, worst |hungarian - brute| {worst:.1e}, {secs:.1f}s")


# --- 6, 7 -------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def rigid_set():
    base = articulated_dataset(6, per_category=3, width=5.0, arm=10.0)[:10]
    masks = []
    for m in base:
        g = m.grid
        canvas = np.zeros((g.shape[0] + 9, g.shape[1] + 4), dtype=bool)
        canvas[7:7 + g.shape[0], 3:3 + g.shape[1]] = g
        masks += [m, mask_from_array(np.rot90(g), f"{m.id}-rot", m.category),
                  mask_from_array(g[:, ::-1], f"{m.id}-mir", m.category),
                  mask_from_array(canvas, f"{m.id}-shift", m.category)]
    results = process_shapes(masks, PipelineConfig())
    return build_dissimilarity_matrix([r.signature for r in results])


def test_c6_rigid_motion_invariance(rigid_set):
    F = rigid_set.fused
    worst = max(F[4 * i, 4 * i + j] for i in range(10) for j in (1, 2, 3))
    distinct = min(F[4 * i, 4 * j] for i in range(10) for j in range(10) if i != j)
    record(6, worst == 0.0, f"10 shapes x (rot90, mirror, translate): max fused {float(worst)!r} (must be 0 exactly); "
                            f"min between different shapes {distinct:.3g}")


def test_c7_self_consistency(rigid_set):
    F = rigid_set.fused
    symmetric = bool(np.array_equal(F, F.T)) and not np.diag(F).any()
    per_space = all(M.min() >= 0 and M.max() <= 2 and np.array_equal(M, M.T) for M in rigid_set.per_space.values())
    weights = [s.weight for s in CANONICAL_SPACES] == [Fraction(1, 4)] * 3 + [Fraction(1, 12)] * 3
    example = fuse([0.1, 0.2, 0.3, 0.06, 0.12, 0.18])
    recombined = sum(float(s.weight) * rigid_set.per_space[str(s)] for s in CANONICAL_SPACES)
    fused_ok = np.allclose(F, recombined, rtol=0, atol=1e-15)
    record(7, symmetric and per_space and weights and abs(example - 0.18) < 1e-15 and fused_ok,
           f"symmetric/zero diag {symmetric}; per-space in [0,2] {per_space}; weights {weights}; "
           f"fuse example {example!r}")


# --- 8 -----------------------------------------------------------------------------

def test_c8_nmi_suite():
    perfect = nmi_from_labels([1, 1, 2, 2, 3, 3], ["a", "a", "b", "b", "c", "c"])[0]
    independent = nmi_from_labels([1, 2, 1, 2], ["a", "a", "b", "b"])[0]
    rng = np.random.default_rng(8)
    invariant = 0
    for _ in range(100):
        n = int(rng.integers(2, 60))
        a, b = rng.integers(0, 6, n), rng.integers(0, 4, n)
        ra = (rng.permutation(6) * 7 + 3)[a]
        rb = np.array(list("wxyz"))[rng.permutation(4)][b]
        invariant += nmi_from_labels(a.tolist(), b.tolist()) == nmi_from_labels(ra.tolist(), rb.tolist())
    record(8, perfect == 1.0 and independent == 0.0 and invariant == 100,
           f"perfect {perfect!r}, independent {independent!r}, exact relabeling invariance {invariant}/100")


# --- 9 -----------------------------------------------------------------------------

def test_c9_synthetic_clustering():
    t = time.perf_counter()
    scores = []
    for seed in range(10):
        masks = articulated_dataset(seed)
        cfg = PipelineConfig(seed=seed)
        dm = build_dissimilarity_matrix([r.signature for r in process_shapes(masks, cfg)])
        _, ca = embed_and_cluster(dm, 4, cfg)
        scores.append(nmi_from_labels(list(ca.cluster), [m.category for m in masks])[0])
    secs = time.perf_counter() - t
    good = sum(s >= 0.9 for s in scores)
    record(9, good >= 8 and secs <= 300,
           f"NMI >= 0.9 on {good}/10 seeds (need 8): {' '.join(f'{s:.3f}' for s in scores)}; {secs:.0f}s")


# --- 10 ----------------------------------------------------------------------------

def test_c10_determinism(tmp_path, small_masks):
    manifest = write_manifest(tmp_path / "data", small_masks)
    outputs = {}
    for name in ("cold1", "cold2"):
        cfg = PipelineConfig(manifest=str(manifest), out_dir=str(tmp_path / name), seed=42)
        run_pipeline(cfg)
        outputs[name] = [(tmp_path / name / f).read_bytes() for f in ("distmat.csv", "clusters.csv")]
    warm = run_pipeline(cfg)
    outputs["warm"] = [(tmp_path / "cold2" / f).read_bytes() for f in ("distmat.csv", "clusters.csv")]
    hits = warm["cache_hits"].get("features", 0)
    same = outputs["cold1"] == outputs["cold2"] == outputs["warm"]
    record(10, same and hits == len(small_masks) * 6,
           f"cold/cold/warm distmat+clusters byte-identical: {same}; warm feature cache hits {hits}")
