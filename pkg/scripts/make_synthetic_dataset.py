"""Write a synthetic articulated-shape dataset (PBM files plus manifest.csv)."""

import argparse
from pathlib import Path

from artishape.shape_io import write_pbm
from artishape.synthetic import CATEGORIES, articulated_dataset


def write_dataset(out, seed=0, per_category=5, **kw) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["path,id,category"]
    for mask in articulated_dataset(seed, per_category, **kw):
        write_pbm(mask.grid, out / f"{mask.id}.pbm")
        rows.append(f"{mask.id}.pbm,{mask.id},{mask.category}")
    manifest = out / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    return manifest


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-category", type=int, default=5)
    p.add_argument("--width", type=float, default=11.0)
    p.add_argument("--arm", type=float, default=30.0)
    p.add_argument("--jitter", type=float, default=15.0)
    a = p.parse_args()
    path = write_dataset(a.out, a.seed, a.per_category, width=a.width, arm=a.arm, jitter_deg=a.jitter)
    print(f"wrote {path} ({a.per_category} x {len(CATEGORIES)} shapes)")


if __name__ == "__main__":
    main()
