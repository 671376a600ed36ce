"""Run the full pipeline on labelled shape datasets and compare NMI with reference values.

Each dataset is given as NAME=MANIFEST[:K], e.g. 56shapes=/data/56/manifest.csv:14.
Without K the number of categories is used.
"""

import argparse
import time

from artishape.pipeline import PipelineConfig, run_pipeline

REFERENCE = {"56shapes": 1.0, "180shapes": 0.9651, "1000shapes": 0.9172}


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("datasets", nargs="+")
    p.add_argument("--out", default="benchmark-out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=42)
    a = p.parse_args()
    for item in a.datasets:
        name, _, rest = item.partition("=")
        manifest, _, k = rest.rpartition(":") if rest.rsplit(":", 1)[-1].isdigit() else (rest, "", "0")
        cfg = PipelineConfig(manifest=manifest, out_dir=f"{a.out}/{name}", seed=a.seed, jobs=a.jobs,
                             k=int(k)).reference_defaults()
        t = time.perf_counter()
        report = run_pipeline(cfg)
        ref = REFERENCE.get(name)
        ref_txt = f" (reference {ref:.4f})" if ref is not None else ""
        nmi = report["NMI"]
        shown = f"{nmi:.4f}" if nmi is not None else report["nmi_status"]
        print(f"{name}: N={report['N']} K={report['K']} NMI={shown}{ref_txt} in {time.perf_counter() - t:.0f}s")


if __name__ == "__main__":
    main()
