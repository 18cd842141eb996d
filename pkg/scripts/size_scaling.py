"""Median t_half against lattice size, with growth ratios between sizes.

    python scripts/size_scaling.py --sizes 30 40 50 --seeds 20 --jobs 4
"""

import argparse
import logging

from dcsoliton.harness import SweepConfig, scaling_csv, scaling_report, sweep


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mask", default="2d-r4-square")
    p.add_argument("--sizes", type=int, nargs="+", default=[30, 40, 50])
    p.add_argument("--points", type=int, default=8)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--min-returned", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)

    cfg = SweepConfig.from_dict({
        "masks": [args.mask], "dims": [[n, n] for n in args.sizes], "n_points": args.points,
        "seeds": list(range(args.seeds)), "max_steps": args.max_steps, "analyses": [],
    })
    entries = scaling_report(sweep(cfg, jobs=args.jobs), args.min_returned)
    print(scaling_csv(entries), end="")


if __name__ == "__main__":
    main()
