"""Command-line entry point: ``artishape <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .clustering import nmi_from_labels, tsne
from .geometry import distance_transform, measure
from .matching import DissimilarityMatrix, build_dissimilarity_matrix
from .partition import ordered_dilation_partition
from .pipeline import (PipelineConfig, embed_and_cluster, fmt, heatmap, process_shapes, read_clusters_csv,
                       read_matrix_csv, region_image, resolve_cache_dir, run_pipeline, write_clusters_csv,
                       write_embedding_csv, write_matrix_csv, write_svg)
from .poisson_features import FeatureSpaceConfig, build_feature_matrix, write_feature_binary
from .rpca import distinctness, rpca_ialm
from .shape_io import load_manifest, load_mask, pbm_text, write_pbm, write_pgm

log = logging.getLogger("artishape")


def _global_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand's copy of a flag from clobbering the
    # value given before the subcommand name
    g = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g.add_argument("--seed", type=int, help="random seed (default 42)")
    g.add_argument("--jobs", type=int, help="worker processes over shapes")
    g.add_argument("--cache-dir", help="cache directory (default <out>/cache, or $ARTISHAPE_CACHE)")
    g.add_argument("--config", help="key=value config file")
    g.add_argument("--threshold", type=float, help="gray threshold for PGM/PNG inputs (default 128)")
    g.add_argument("--invert", action="store_true", help="treat dark pixels as the shape")
    g.add_argument("-v", "--verbose", action="store_true")
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_parser()
    p = argparse.ArgumentParser(prog="artishape", parents=[common],
                                description="Articulated 2-D shape representation, matching and clustering.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    s = add("measure", "print R, G and pixel count of a mask")
    s.add_argument("mask")

    s = add("features", "write the m x 30 feature matrix of one feature space")
    s.add_argument("mask")
    s.add_argument("--space", default="3R")
    s.add_argument("-o", "--output", help="CSV path (default stdout)")
    s.add_argument("--binary", help="also write the little-endian binary matrix here")

    s = add("distinctness", "distinctness heatmap (PGM) and per-pixel CSV")
    s.add_argument("mask")
    s.add_argument("--space", default="3R")
    s.add_argument("-o", "--output", help="output prefix (default: mask stem)")

    s = add("partition", "region partition as a gray-level PGM")
    s.add_argument("mask")
    s.add_argument("--space", default="3R")
    s.add_argument("-o", "--output", help="PGM path (default: <mask stem>_partition.pgm)")

    s = add("distmat", "fused dissimilarity matrix of a manifest")
    s.add_argument("manifest")
    s.add_argument("-o", "--output", default="dist.csv")
    s.add_argument("--per-space", action="store_true")

    s = add("embed", "t-SNE embedding of a dissimilarity CSV")
    s.add_argument("distmat")
    s.add_argument("-o", "--output", default="emb.csv")
    s.add_argument("--svg")
    s.add_argument("--manifest", help="manifest with categories for coloring")
    s.add_argument("--perplexity", type=float)

    s = add("cluster", "t-SNE then affinity propagation at K clusters")
    s.add_argument("distmat")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("-o", "--output", default="clusters.csv")

    s = add("nmi", "NMI of a clusters CSV against manifest categories")
    s.add_argument("clusters")
    s.add_argument("manifest")

    s = add("run", "full pipeline over a manifest")
    s.add_argument("manifest")
    s.add_argument("-o", "--out-dir")
    s.add_argument("--k", type=int)
    s.add_argument("--paper-defaults", action="store_true", help="reset tunables and print the effective config")
    s.add_argument("--per-space", action="store_true", default=None)
    s.add_argument("--images", action="store_true", default=None)

    s = add("dump-mask", "write the loaded, cropped mask as plain PBM")
    s.add_argument("mask")
    s.add_argument("-o", "--output", help="PBM path (default stdout)")
    return p


def make_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = PipelineConfig.from_file(args.config, cfg)
    if getattr(args, "paper_defaults", False):
        cfg = cfg.reference_defaults()
    overrides = {}
    for key in ("seed", "jobs", "cache_dir", "threshold", "invert", "k", "per_space", "images", "out_dir",
                "perplexity"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return cfg.update({k: str(v) for k, v in overrides.items()})


def _load(args, cfg):
    return load_mask(args.mask, cfg.threshold, cfg.invert)


def _stem(path) -> str:
    return Path(path).with_suffix("").name


def _field(mask, space_name, cfg):
    space = FeatureSpaceConfig.parse(space_name)
    fm = build_feature_matrix(mask, space, measure(mask, cfg.sample_cap), cfg.pde_tol)
    res = rpca_ialm(fm.D, 1.0 / np.sqrt(mask.m), cfg.rpca_tol, cfg.rpca_max_iter, cfg.rpca_rho)
    return distinctness(res.S, fm.pixel_index)


def cmd_measure(args, cfg):
    mask = _load(args, cfg)
    meas = measure(mask, cfg.sample_cap)
    print(f"R={fmt(meas.R)} G={fmt(meas.G)} m={mask.m}")


def cmd_features(args, cfg):
    mask = _load(args, cfg)
    space = FeatureSpaceConfig.parse(args.space)
    fm = build_feature_matrix(mask, space, measure(mask, cfg.sample_cap), cfg.pde_tol)
    lines = ["x,y," + ",".join(f"f{k}" for k in range(1, fm.D.shape[1] + 1))]
    for (x, y), row in zip(fm.pixel_index, fm.D):
        lines.append(f"{x},{y}," + ",".join(fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.binary:
        write_feature_binary(fm.D, args.binary)


def cmd_distinctness(args, cfg):
    mask = _load(args, cfg)
    fld = _field(mask, args.space, cfg)
    prefix = args.output or f"{_stem(args.mask)}_{args.space}"
    write_pgm(heatmap(fld, mask.shape), f"{prefix}.pgm")
    lines = ["x,y,raw,normalized"]
    lines += [f"{x},{y},{fmt(r)},{fmt(n)}" for (x, y), r, n in zip(fld.pixel_index, fld.raw, fld.normalized)]
    Path(f"{prefix}.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {prefix}.pgm and {prefix}.csv")


def cmd_partition(args, cfg):
    mask = _load(args, cfg)
    fld = _field(mask, args.space, cfg)
    lab = ordered_dilation_partition(mask, fld, distance_transform(mask))
    out = args.output or f"{_stem(args.mask)}_{args.space}_partition.pgm"
    write_pgm(region_image(lab), out)
    print(f"regions={lab.region_count} high={int(lab.high.sum())} -> {out}")


def cmd_distmat(args, cfg):
    out = Path(args.output)
    cfg = cfg.update({"out_dir": str(out.parent or ".")})
    manifest = load_manifest(args.manifest)
    masks = [load_mask(p, cfg.threshold, cfg.invert, id=sid, category=cat) for p, sid, cat in manifest.entries]
    results = process_shapes(masks, cfg, resolve_cache_dir(cfg))
    dm = build_dissimilarity_matrix([r.signature for r in results])
    write_matrix_csv(out, dm.ids, dm.fused)
    if args.per_space:
        for space, M in dm.per_space.items():
            write_matrix_csv(out.with_name(f"{out.stem}_{space}{out.suffix}"), dm.ids, M)
    print(f"wrote {out} ({len(dm.ids)} shapes)")


def cmd_embed(args, cfg):
    ids, D = read_matrix_csv(args.distmat)
    emb = tsne(D, ids, cfg.perplexity or None, cfg.tsne_iters, cfg.seed)
    write_embedding_csv(args.output, emb)
    if args.svg:
        cats = load_manifest(args.manifest).categories if args.manifest else None
        write_svg(args.svg, emb, cats)
    print(f"wrote {args.output} (KL={emb.kl[-1]:.4f}, perplexity={emb.perplexity:g}, seed={cfg.seed})")


def cmd_cluster(args, cfg):
    ids, D = read_matrix_csv(args.distmat)
    _, ca = embed_and_cluster(DissimilarityMatrix(ids, D), args.k, cfg)
    write_clusters_csv(args.output, ca)
    note = "" if ca.exact_k else f" (wanted {args.k})"
    print(f"wrote {args.output}: {ca.k} clusters{note}, seed={cfg.seed}")


def cmd_nmi(args, cfg):
    clusters = read_clusters_csv(args.clusters)
    categories = load_manifest(args.manifest).categories
    if set(clusters) != set(categories):
        raise ValueError("cluster ids and manifest ids differ")
    ids = sorted(clusters)
    value, degenerate = nmi_from_labels([clusters[i] for i in ids], [categories[i] for i in ids])
    if degenerate:
        log.warning("single cluster or single category: NMI is undefined, reporting 0")
    print(f"NMI={value:.4f}")


def cmd_run(args, cfg):
    cfg = cfg.update({"manifest": args.manifest})
    if args.paper_defaults:
        sys.stdout.write(cfg.to_text())
    report = run_pipeline(cfg)
    print(report["summary"])


def cmd_dump_mask(args, cfg):
    mask = _load(args, cfg)
    if args.output:
        write_pbm(mask.grid, args.output)
    else:
        sys.stdout.write(pbm_text(mask.grid))


COMMANDS = {
    "measure": cmd_measure, "features": cmd_features, "distinctness": cmd_distinctness,
    "partition": cmd_partition, "distmat": cmd_distmat, "embed": cmd_embed, "cluster": cmd_cluster,
    "nmi": cmd_nmi, "run": cmd_run, "dump-mask": cmd_dump_mask,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        COMMANDS[args.command](args, cfg)
    except Exception as exc:
        print(f"artishape {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
