"""Run every default separation sweep and write one CSV per family.

Usage: python scripts/separation_sweeps.py [--out DIR] [--seed S] [--threads T]
"""

import argparse
import pathlib
import time

from entrocon.config import OptimizerConfig
from entrocon.gallery import SWEEP_DEFAULTS, separation_sweep, sweep_csv


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="sweeps")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--families", nargs="*", default=sorted(SWEEP_DEFAULTS))
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = OptimizerConfig(seed=args.seed, threads=args.threads)
    for family in args.families:
        start = time.perf_counter()
        rows = separation_sweep(family, cfg=cfg)
        (out / f"{family}.csv").write_text(sweep_csv(rows))
        print(f"{family}: {len(rows)} rows in {time.perf_counter() - start:.1f} s")
        for row in rows:
            print(f"  {row.parameter}={row.value:g}  {row.numerator} in [{row.num_lower:.4g}, "
                  f"{row.num_upper:.4g}]  {row.denominator} in [{row.den_lower:.4g}, "
                  f"{row.den_upper:.4g}]  certified ratio {row.certified_ratio:.4g}")


if __name__ == "__main__":
    main()
