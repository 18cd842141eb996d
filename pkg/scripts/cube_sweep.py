"""Three-dimensional runs: return rate, median t_half and lambda distribution per point count.

    python scripts/cube_sweep.py --points 8 12 16 --seeds 20 --jobs 4
"""

import argparse
import logging
from collections import Counter

from dcsoliton.harness import SweepConfig, lower_median, sweep


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mask", default="3d-r1-edges")
    p.add_argument("--size", type=int, default=11)
    p.add_argument("--points", type=int, nargs="+", default=[8, 12, 16])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)

    cfg = SweepConfig.from_dict({
        "masks": [args.mask], "dims": [args.size] * 3, "n_points": args.points,
        "seeds": list(range(args.seeds)), "max_steps": args.max_steps, "analyses": ["mcl"],
    })
    rows = sweep(cfg, jobs=args.jobs)
    for n in args.points:
        done = [r for r in rows if r.n_points == n and r.returned]
        med = lower_median([r.t_half for r in done]) if done else None
        lams = Counter(r.lambda_ for r in done)
        print(f"n={n}: {len(done)}/{args.seeds} returned, median t_half {med}, "
              f"lambda {dict(sorted(lams.items()))}")


if __name__ == "__main__":
    main()
