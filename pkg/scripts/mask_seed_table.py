"""Mask x seed table of t_half on a 70x70 torus (8 starting points per run).

    python scripts/mask_seed_table.py --seeds 5 --jobs 4 --out table.csv
"""

import argparse
import logging

from dcsoliton.harness import SweepConfig, rows_to_csv, sweep

MASKS = ["2d-r1-vonneumann", "2d-r1-moore", "2d-r2-balanced", "2d-r3-balanced", "2d-r4-square"]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--masks", nargs="+", default=MASKS)
    p.add_argument("--size", type=int, default=70)
    p.add_argument("--points", type=int, default=8)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)

    cfg = SweepConfig.from_dict({
        "masks": args.masks, "dims": [args.size, args.size], "n_points": args.points,
        "seeds": list(range(args.seeds)), "max_steps": args.max_steps, "analyses": ["mcl"],
    })
    rows = sweep(cfg, jobs=args.jobs)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(rows_to_csv(rows))

    width = max(len(m) for m in args.masks)
    print(f"{'mask':<{width}}  " + "  ".join(f"s{s:<6}" for s in range(args.seeds)) + "  returned")
    for mask in args.masks:
        mine = [r for r in rows if r.mask_id == mask]
        cells = [f"{r.t_half:<7}" if r.returned else f"{'-':<7}" for r in mine]
        print(f"{mask:<{width}}  " + "  ".join(cells) + f"  {sum(r.returned for r in mine)}/{len(mine)}")


if __name__ == "__main__":
    main()
