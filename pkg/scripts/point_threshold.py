"""Fraction of starts that grow a torus-wrapping river early, against point count.

    python scripts/point_threshold.py --points 8 12 16 20 24 --seeds 20
"""

import argparse
import logging

from dcsoliton.harness import SweepConfig, sweep


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mask", default="2d-r2-balanced")
    p.add_argument("--size", type=int, default=70)
    p.add_argument("--points", type=int, nargs="+", default=[8, 12, 16, 20, 24])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--screen-only", action="store_true",
                   help="skip the full run when no SuperRiver forms early")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.ERROR)

    cfg = SweepConfig.from_dict({
        "masks": [args.mask], "dims": [args.size, args.size], "n_points": args.points,
        "seeds": list(range(args.seeds)), "max_steps": args.max_steps, "analyses": [],
        "early_screen": args.horizon, "skip_unscreened": args.screen_only,
    })
    rows = sweep(cfg, jobs=args.jobs)
    print("n_points,superriver_fraction,returned_given_superriver")
    for n in args.points:
        mine = [r for r in rows if r.n_points == n]
        early = [r for r in mine if r.superriver_early]
        back = sum(r.returned for r in early)
        print(f"{n},{len(early) / len(mine):.2f},{back}/{len(early)}")


if __name__ == "__main__":
    main()
