"""End-to-end dataset run: masks -> signatures -> distances -> clusters -> NMI."""

from __future__ import annotations

import dataclasses
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .cache import ArrayCache, make_key
from .clustering import (ClusterAssignment, Embedding2D, cluster_at_k, cluster_similarity_at_k,
                         nmi_from_labels, tsne)
from .geometry import ShapeMeasurements, distance_transform, measure
from .matching import (DissimilarityMatrix, ShapeSignature, build_dissimilarity_matrix,
                       describe_regions)
from .partition import RegionLabeling, ordered_dilation_partition
from .poisson_features import CANONICAL_SPACES, FeatureSpaceConfig, feature_matrix
from .rpca import DistinctnessField, distinctness, rpca_ialm
from .shape_io import ShapeMask, canonical_pose, load_manifest, load_mask, write_pgm

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    manifest: str = ""
    out_dir: str = "artishape-out"
    cache_dir: str = ""  # empty: <out_dir>/cache
    seed: int = 42
    jobs: int = 1
    threshold: float = 128.0
    invert: bool = False
    sample_cap: int = 512
    pde_tol: float = 1e-8
    rpca_tol: float = 1e-7
    rpca_max_iter: int = 1000
    rpca_rho: float = 1.5
    spaces: tuple = tuple(str(s) for s in CANONICAL_SPACES)
    k: int = 0  # 0: number of categories in the manifest
    perplexity: float = 0.0  # 0: min(30, (N - 1) / 3)
    tsne_iters: int = 1000
    damping: float = 0.9
    ap_max_iter: int = 1000
    stable_window: int = 100
    per_space: bool = False
    images: bool = False

    def space_configs(self) -> list[FeatureSpaceConfig]:
        return [FeatureSpaceConfig.parse(s) for s in self.spaces]

    def reference_defaults(self) -> "PipelineConfig":
        """Reset every tunable; keep I/O paths, seed, jobs and k."""
        keep = {f: getattr(self, f) for f in ("manifest", "out_dir", "cache_dir", "seed", "jobs", "k")}
        return PipelineConfig(**keep)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    def update(self, values: dict[str, str]) -> "PipelineConfig":
        kw = {}
        types = {f.name: f.type for f in dataclasses.fields(self)}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            cur = getattr(self, key)
            if isinstance(cur, bool):
                val = str(raw).strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(cur, tuple):
                val = tuple(s.strip() for s in str(raw).split(",") if s.strip())
            else:
                val = type(cur)(raw)
            kw[key] = val
        return dataclasses.replace(self, **kw)

    @classmethod
    def from_file(cls, path, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        values = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            values[k.strip()] = v.strip()
        return (base or cls()).update(values)


@dataclass
class ShapeResult:
    signature: ShapeSignature
    measurements: ShapeMeasurements
    fields: dict[str, DistinctnessField] = field(default_factory=dict)
    labelings: dict[str, RegionLabeling] = field(default_factory=dict)
    grid: np.ndarray | None = None
    timings: Counter = field(default_factory=Counter)
    hits: Counter = field(default_factory=Counter)
    misses: Counter = field(default_factory=Counter)
    rpca_flags: list[str] = field(default_factory=list)


def process_shape(mask: ShapeMask, cfg: PipelineConfig, cache_root=None, keep_fields: bool = False) -> ShapeResult:
    """Signature of one shape over every configured feature space.

    The mask is first brought to its canonical dihedral pose, so rotated or
    mirrored copies produce identical signatures.
    """
    cache = ArrayCache(cache_root)
    timings = Counter()
    flags = []
    t = time.perf_counter()
    mask = canonical_pose(mask)
    shape_hash = mask.content_hash()
    key = make_key("measure", shape_hash, cfg.sample_cap)
    hit = cache.get("measure", key)
    if hit is None:
        meas = measure(mask, cfg.sample_cap)
        cache.put("measure", key, {"RG": np.array([meas.R, meas.G])})
    else:
        meas = ShapeMeasurements(*map(float, hit["RG"]))
    dist = distance_transform(mask)
    pixel_index = mask.pixel_index()
    timings["measure"] += time.perf_counter() - t

    spaces = cfg.space_configs()
    regions = []
    fields, labelings = {}, {}
    lam = 1.0 / np.sqrt(mask.m)
    for space in spaces:
        rho_star = space.rho_star(meas)
        t = time.perf_counter()
        fkey = make_key("features", shape_hash, repr(rho_star), cfg.pde_tol)
        hit = cache.get("features", fkey)
        if hit is None:
            D = feature_matrix(mask, rho_star, cfg.pde_tol)
            cache.put("features", fkey, {"D": D})
        else:
            D = hit["D"]
        timings["features"] += time.perf_counter() - t

        t = time.perf_counter()
        rkey = make_key("rpca", fkey, repr(lam), cfg.rpca_tol, cfg.rpca_max_iter, cfg.rpca_rho)
        hit = cache.get("rpca", rkey)
        if hit is None:
            res = rpca_ialm(D, lam, cfg.rpca_tol, cfg.rpca_max_iter, cfg.rpca_rho)
            S, info = res.S, np.array([res.iterations, res.final_residual, float(res.converged)])
            cache.put("rpca", rkey, {"S": S, "info": info})
        else:
            S, info = hit["S"], hit["info"]
        if not info[2]:
            flags.append(f"{mask.id}/{space}: RPCA not converged (residual {info[1]:.3g})")
        fld = distinctness(S, pixel_index)
        timings["rpca"] += time.perf_counter() - t

        t = time.perf_counter()
        pkey = make_key("partition", rkey)
        hit = cache.get("partition", pkey)
        if hit is None:
            lab = ordered_dilation_partition(mask, fld, dist)
            cache.put("partition", pkey, {"label": lab.label.astype(np.int32), "high": lab.high})
        else:
            lab = RegionLabeling(hit["label"].astype(np.int64), len(hit["high"]), hit["high"].astype(bool))
        timings["partition"] += time.perf_counter() - t

        t = time.perf_counter()
        regions.append(describe_regions(lab, fld))
        timings["descriptors"] += time.perf_counter() - t
        if keep_fields:
            fields[str(space)] = fld
            labelings[str(space)] = lab

    sig = ShapeSignature(mask.id, spaces, regions, mask.category)
    return ShapeResult(sig, meas, fields, labelings, mask.grid if keep_fields else None, timings,
                       cache.hits, cache.misses, flags)


def _process_entry(args):
    mask, cfg, cache_root, keep = args
    try:
        return process_shape(mask, cfg, cache_root, keep)
    except Exception as exc:
        raise RuntimeError(f"stage failure on shape {mask.id!r}: {exc}") from exc


def process_shapes(masks: Sequence[ShapeMask], cfg: PipelineConfig, cache_root=None,
                   keep_fields: bool = False) -> list[ShapeResult]:
    work = [(m, cfg, cache_root, keep_fields) for m in masks]
    if cfg.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_process_entry, work))
    return [_process_entry(w) for w in work]


def embed_and_cluster(dm: DissimilarityMatrix, k: int, cfg: PipelineConfig):
    """t-SNE then affinity propagation at ``k`` clusters.

    Below 4 shapes t-SNE is undefined; clustering then runs on the negative
    squared dissimilarities directly and no embedding is returned.
    """
    if len(dm.ids) < 4:
        ca = cluster_similarity_at_k(-dm.fused ** 2, dm.ids, k, cfg.damping, cfg.ap_max_iter,
                                     cfg.stable_window)
        return None, ca
    emb = tsne(dm.fused, dm.ids, cfg.perplexity or None, cfg.tsne_iters, cfg.seed)
    ca = cluster_at_k(emb, k, cfg.damping, cfg.ap_max_iter, cfg.stable_window)
    return emb, ca


# --- CSV writers -------------------------------------------------------------------

def fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_matrix_csv(path, ids, M) -> None:
    lines = ["id," + ",".join(ids)]
    for i, row_id in enumerate(ids):
        lines.append(row_id + "," + ",".join(fmt(v) for v in M[i]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    rows = [line.split(",") for line in Path(path).read_text().splitlines() if line.strip()]
    ids = rows[0][1:]
    if [r[0] for r in rows[1:]] != ids:
        raise ValueError(f"{path}: row ids do not match header ids")
    M = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return ids, M


def write_embedding_csv(path, emb: Embedding2D) -> None:
    lines = ["id,x,y"] + [f"{i},{fmt(x)},{fmt(y)}" for i, (x, y) in zip(emb.ids, emb.coords)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_clusters_csv(path, ca: ClusterAssignment) -> None:
    lines = ["id,cluster,exemplar"]
    for sid, c in zip(ca.ids, ca.cluster):
        lines.append(f"{sid},{int(c)},{ca.exemplars[int(c) - 1]}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_clusters_csv(path) -> dict[str, int]:
    out = {}
    for line in Path(path).read_text().splitlines()[1:]:
        if line.strip():
            sid, c, _ = line.split(",")
            out[sid] = int(c)
    return out


def write_svg(path, emb: Embedding2D, categories: dict[str, str] | None = None, size: int = 600) -> None:
    """Scatter plot of the embedding, colored by category when known."""
    xy = emb.coords
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    pts = 20 + (xy - lo) / span * (size - 40)
    cats = sorted({categories.get(i, "") for i in emb.ids}) if categories else [""]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    for sid, (x, y) in zip(emb.ids, pts):
        c = cats.index(categories.get(sid, "")) if categories else 0
        hue = int(360 * c / max(1, len(cats)))
        label = categories.get(sid, "") if categories else ""
        out.append(f'<circle cx="{x:.2f}" cy="{size - y:.2f}" r="5" fill="hsl({hue},70%,45%)">'
                   f'<title>{sid} {label}</title></circle>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def heatmap(fld: DistinctnessField, shape) -> np.ndarray:
    return np.round(fld.to_grid(shape) * 255).astype(np.uint8)


def region_image(labeling: RegionLabeling) -> np.ndarray:
    """Gray level per region: low-set regions light, high-set regions dark."""
    img = np.full(labeling.label.shape, 255, dtype=np.uint8)
    n = labeling.region_count
    for r in range(1, n + 1):
        base = 40 if labeling.high[r - 1] else 140
        img[labeling.label == r] = base + (r * 37) % 80
    return img


# --- full run -----------------------------------------------------------------------

def resolve_cache_dir(cfg: PipelineConfig, env: dict | None = None) -> Path:
    import os

    env = os.environ if env is None else env
    if cfg.cache_dir:
        return Path(cfg.cache_dir)
    if env.get("ARTISHAPE_CACHE"):
        return Path(env["ARTISHAPE_CACHE"])
    return Path(cfg.out_dir) / "cache"


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage for a manifest and write outputs into ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache_root = resolve_cache_dir(cfg)
    report = {"version": __version__, "seed": cfg.seed, "flags": [], "timings": Counter()}

    t = time.perf_counter()
    manifest = load_manifest(cfg.manifest)
    masks = []
    for path, sid, cat in manifest.entries:
        try:
            masks.append(load_mask(path, cfg.threshold, cfg.invert, id=sid, category=cat))
        except Exception as exc:
            raise RuntimeError(f"stage 'load' failed on shape {sid!r}: {exc}") from exc
    report["timings"]["load"] = time.perf_counter() - t
    report["N"] = len(masks)

    results = process_shapes(masks, cfg, cache_root, keep_fields=cfg.images)
    hits, misses = Counter(), Counter()
    for r in results:
        report["timings"].update(r.timings)
        hits.update(r.hits)
        misses.update(r.misses)
        report["flags"].extend(r.rpca_flags)
    report["cache_hits"] = dict(hits)
    report["cache_misses"] = dict(misses)

    if cfg.images:
        img_dir = out / "images"
        img_dir.mkdir(exist_ok=True)
        for r in results:
            sid = r.signature.shape_id
            for space, fld in r.fields.items():
                write_pgm(heatmap(fld, r.grid.shape), img_dir / f"{sid}_{space}_distinctness.pgm")
                write_pgm(region_image(r.labelings[space]), img_dir / f"{sid}_{space}_partition.pgm")

    t = time.perf_counter()
    dm = build_dissimilarity_matrix([r.signature for r in results])
    report["timings"]["distmat"] = time.perf_counter() - t
    write_matrix_csv(out / "distmat.csv", dm.ids, dm.fused)
    if cfg.per_space:
        for space, M in dm.per_space.items():
            write_matrix_csv(out / f"distmat_{space}.csv", dm.ids, M)

    categories = manifest.categories
    labelled = manifest.has_labels()
    k = cfg.k or (len(set(categories.values())) if labelled else 0)
    report["K"] = k
    report["NMI"] = None
    if k == 0:
        report["flags"].append("cluster: skipped (no --k and no labels)")
        report["nmi_status"] = "skipped: no labels"
        return _finish(report, out, cfg)

    t = time.perf_counter()
    emb, ca = embed_and_cluster(dm, k, cfg)
    report["timings"]["embed+cluster"] = time.perf_counter() - t
    if emb is not None:
        write_embedding_csv(out / "embedding.csv", emb)
        write_svg(out / "embedding.svg", emb, categories if labelled else None)
    write_clusters_csv(out / "clusters.csv", ca)
    report["K_found"] = ca.k
    if not ca.exact_k:
        report["flags"].append(f"cluster: found {ca.k} clusters, wanted {k}")

    if not labelled:
        report["nmi_status"] = "skipped: no labels"
    else:
        value, degenerate = nmi_from_labels(list(ca.cluster), [categories[i] for i in ca.ids])
        if degenerate:
            report["nmi_status"] = "skipped: single cluster or category"
        else:
            report["NMI"] = value
            report["nmi_status"] = "ok"
    return _finish(report, out, cfg)


def _finish(report: dict, out: Path, cfg: PipelineConfig) -> dict:
    (out / "config.txt").write_text(cfg.to_text())
    lines = [f"artishape {report['version']}", f"seed={report['seed']}", f"N={report['N']}",
             f"K={report.get('K', 0)}"]
    if "K_found" in report:
        lines.append(f"K_found={report['K_found']}")
    nmi_val = report.get("NMI")
    lines.append(f"NMI={nmi_val:.4f}" if nmi_val is not None else f"NMI {report.get('nmi_status', 'skipped')}")
    for stage, secs in report["timings"].items():
        lines.append(f"time[{stage}]={secs:.3f}s")
    for stage in sorted(set(report["cache_hits"]) | set(report["cache_misses"])):
        lines.append(f"cache[{stage}] hits={report['cache_hits'].get(stage, 0)} "
                     f"misses={report['cache_misses'].get(stage, 0)}")
    lines += [f"flag: {f}" for f in report["flags"]]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    rows = ["key,value", f"N,{report['N']}", f"K,{report.get('K', 0)}", f"seed,{report['seed']}",
            f"NMI,{'' if nmi_val is None else fmt(nmi_val)}"]
    rows += [f"time_{s},{fmt(v)}" for s, v in report["timings"].items()]
    (out / "summary.csv").write_text("\n".join(rows) + "\n")
    report["summary"] = "\n".join(lines)
    return report
