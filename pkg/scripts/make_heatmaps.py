"""Heatmap panels for one test sample: CP and CQR, each as angle-only,
uncorrected joint and Sidak-corrected joint intervals over the 10-80% ladder.

    python scripts/make_heatmaps.py --out figures --sample 0
"""

import argparse
from pathlib import Path

from polarcp.geometry import from_polar
from polarcp.heatmap import DEFAULT_LADDER, emit, ladder_intervals, rasterize
from polarcp.quantreg import train
from polarcp.synthdata import GeneratorConfig, generate, split


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("figures"))
    p.add_argument("--sample", type=int, default=0, help="index into the test split")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=7)
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    cal, test = split(generate(GeneratorConfig(n=2500, seed=args.seed)), 500, seed=0)
    tr = generate(GeneratorConfig(n=1000, seed=args.seed + 1))
    heads = train(tr.features, tr.gt_angle, tr.gt_mag, 1 - min(DEFAULT_LADDER))
    sample = test.subset([args.sample])
    gt = from_polar(float(sample.gt_angle[0]), float(sample.gt_mag[0]))

    panels = [("angle", "none", True), ("none", "none", False), ("sidak", "sidak", False)]
    for method in ("cp", "cqr"):
        for tag, correction, angle_only in panels:
            intervals = ladder_intervals(method, cal, sample, DEFAULT_LADDER, correction,
                                         heads if method == "cqr" else None, angle_only)
            grid = rasterize(intervals, (0.5, 0.5), args.size, args.size)
            pgm, _ = emit(grid, args.out / f"{method}_{tag}", gt)
            print(f"wrote {pgm}")


if __name__ == "__main__":
    main()
