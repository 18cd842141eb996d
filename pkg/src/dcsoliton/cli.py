"""Command line: ``dcsoliton run | sweep | analyze | render``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


from .analysis import NotReturnedError, fit_symmetry, median_series, series_csv
from .engine import run_to_mirror
from .filters import frame_window
from .harness import (
    ConfigError,
    SweepConfig,
    analyze_record,
    build_record,
    load_record,
    parse_dims,
    scaling_csv,
    scaling_report,
    sweep,
    trajectory_from_record,
    write_record,
    write_results,
)
from .lattice import mask_parity_balance, parse_boundary, random_initial, resolve_mask
from .render import render_filters, render_state, write_images
from .structures import DEFAULT_THETA, DEFAULT_WINDOW, detect_nullrivers, nullriver_signature_scan

log = logging.getLogger("dcsoliton")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dims(args) -> tuple[int, ...]:
    dims = parse_dims(args.size)
    if args.dims is not None:
        if len(dims) == 1:
            dims = dims * args.dims
        elif len(dims) != args.dims:
            raise UsageError(f"--size {args.size} has {len(dims)} axes but --dims is {args.dims}")
    return dims


def cmd_run(args) -> int:
    mask = resolve_mask(args.mask)
    dims = _dims(args)
    if len(dims) != mask.dim:
        raise UsageError(f"mask is {mask.dim}D but the lattice is {len(dims)}D")
    balance = mask_parity_balance(mask)
    if balance.warn:
        log.warning("mask %s is parity-unbalanced (%d even / %d odd offsets)",
                    mask.name or args.mask, balance.even_count, balance.odd_count)
    boundary = args.boundary or "P" * len(dims)
    start = random_initial(dims, args.points, args.seed, parse_boundary(boundary))
    outcome = run_to_mirror(start, mask, args.max_steps)
    rec = build_record(mask.name or str(args.mask), mask, start, outcome,
                       args.points, args.seed, args.max_steps)
    write_record(rec, args.out)
    status = f"returned t_half={outcome.t_half}" if outcome.returned else f"no return within {args.max_steps} steps"
    print(f"{status}; record written to {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = SweepConfig.load(args.config)
    rows = sweep(cfg, jobs=args.jobs)
    write_results(rows, args.out)
    returned = sum(r.returned for r in rows)
    print(f"{len(rows)} runs, {returned} returned; results in {args.out}")
    if args.scaling:
        Path(args.scaling).write_text(scaling_csv(scaling_report(rows, args.min_returned)))
    return EXIT_OK


def cmd_analyze(args) -> int:
    rec = load_record(args.run)
    traj = trajectory_from_record(rec)
    wanted = [name for name in ("mcl", "integral", "events") if getattr(args, name)]
    if args.symmetry and "integral" not in wanted:
        wanted.append("integral")
    analyze_record(rec, wanted, args.theta, args.window, traj=traj)
    report = dict(rec["analysis"])
    if args.symmetry:
        if not traj.outcome.returned:
            raise NotReturnedError("symmetry fit requires a closed run")
        fit = fit_symmetry(median_series(traj.outcome.nc_series), report["S"], traj.t_half)
        report["symmetry"] = {
            "k": fit.k, "m0": fit.m0, "residual": fit.residual, "correlation": fit.correlation,
            "per_segment_residual": fit.per_segment_residual, "t_from": fit.t_from, "t_to": fit.t_to,
            "segments": [[s.start, s.sign, s.offset] for s in fit.segments],
        }
        rec["analysis"]["symmetry"] = report["symmetry"]
    if args.series_csv:
        S = report.get("S")
        Path(args.series_csv).write_text(series_csv(traj.outcome.nc_series, S))
    if args.nullrivers:
        t_stop = traj.t_half if traj.t_half is not None else traj.outcome.t_end
        sightings = []
        for t in range(6, max(t_stop - 6, 6), args.every):
            sightings.extend(detect_nullrivers(traj, t))
        stats = nullriver_signature_scan(sightings)
        Path(args.nullrivers).write_text(stats.to_csv())
        report["nullriver_sightings"] = stats.n_sightings
    if args.out:
        write_record(rec, args.out)
    shown = {k: v for k, v in report.items() if k not in ("S", "events")}
    if "S" in report:
        shown["S_final"] = report["S"][-1] if report["S"] else None
    if "events" in report:
        shown["event_count"] = len(report["events"])
    if "symmetry" in shown:
        shown["symmetry"] = {k: v for k, v in shown["symmetry"].items() if k != "segments"}
        shown["symmetry"]["segment_count"] = len(report["symmetry"]["segments"])
    print(json.dumps(shown, indent=1, sort_keys=True))
    return EXIT_OK


def _parse_filters(spec: str):
    a, b, c = False, [], []
    for tok in filter(None, (t.strip().lower() for t in spec.split(","))):
        if tok == "a":
            a = True
        elif len(tok) == 2 and tok[0] in "bc" and tok[1] in "012":
            (b if tok[0] == "b" else c).append(int(tok[1]))
        else:
            raise UsageError(f"unknown filter {tok!r}; use a, b0..b2, c0..c2")
    return a, b, c


def cmd_render(args) -> int:
    rec = load_record(args.run)
    traj = trajectory_from_record(rec)
    if args.filters:
        a, b, c = _parse_filters(args.filters)
        images = render_filters(frame_window(traj, args.t), a, b, c, scale=args.scale,
                                transparent_bank=args.transparent_bank)
    else:
        images = render_state(traj.frame(args.t), scale=args.scale)
    paths = write_images(images, args.out)
    print("\n".join(str(p) for p in paths))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dcsoliton", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="evolve one seeded start to its mirror point")
    r.add_argument("--mask", required=True, help="mask file or bundled mask name")
    r.add_argument("--size", required=True, help="extents like 70x70, or one extent with --dims")
    r.add_argument("--dims", type=int, help="lattice dimension (with a single --size extent)")
    r.add_argument("--points", type=int, required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--max-steps", type=int, default=100_000)
    r.add_argument("--boundary", help="P/O per axis, e.g. PO (default all periodic)")
    r.add_argument("--out", required=True, help="run record JSON")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a seeded mask x seed x size grid")
    s.add_argument("--config", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True, help="results CSV (timings go to <out>.timing.csv)")
    s.add_argument("--scaling", help="also write a t_half scaling table here")
    s.add_argument("--min-returned", type=int, default=10)
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", help="analyses on a saved run record")
    a.add_argument("--run", required=True)
    a.add_argument("--mcl", action="store_true", help="conservation-law lambda")
    a.add_argument("--integral", action="store_true", help="S(0,t) series")
    a.add_argument("--symmetry", action="store_true", help="median vs. integral fit")
    a.add_argument("--events", action="store_true", help="local time reversals")
    a.add_argument("--theta", type=int, default=DEFAULT_THETA)
    a.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    a.add_argument("--series-csv", help="write t/phase/median/S series CSV")
    a.add_argument("--nullrivers", help="write NullRiver signature table CSV")
    a.add_argument("--every", type=int, default=12, help="NullRiver scan stride")
    a.add_argument("--out", help="write the augmented run record here")
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("render", help="PPM image of a frame or filter overlay")
    d.add_argument("--run", required=True)
    d.add_argument("--t", type=int, required=True)
    d.add_argument("--filters", help="comma list: a, b0..b2, c0..c2 (default: plain state)")
    d.add_argument("--scale", type=int, default=5)
    d.add_argument("--transparent-bank", action="store_true")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dcsoliton: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, KeyError, ConfigError) as exc:
        print(f"dcsoliton: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
