"""Open-boundary variants: does lambda stay uniform across cells when axes do not wrap?

    python scripts/open_boundary.py --boundary PO OO --seeds 10
"""

import argparse
import logging

from dcsoliton.harness import SweepConfig, sweep


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mask", default="2d-r2-balanced")
    p.add_argument("--size", type=int, default=30)
    p.add_argument("--points", type=int, default=8)
    p.add_argument("--boundary", nargs="+", default=["PP", "PO", "OO"])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)

    for flags in args.boundary:
        cfg = SweepConfig.from_dict({
            "masks": [args.mask], "dims": [args.size, args.size], "boundary": flags,
            "n_points": args.points, "seeds": list(range(args.seeds)),
            "max_steps": args.max_steps, "analyses": ["mcl"],
        })
        rows = sweep(cfg, jobs=args.jobs)
        done = [r for r in rows if r.returned]
        broken = [r.seed for r in done if r.lambda_ is None]
        print(f"{flags}: {len(done)}/{len(rows)} returned, lambdas {[r.lambda_ for r in done]}, "
              f"non-uniform: {broken or 'none'}")


if __name__ == "__main__":
    main()
