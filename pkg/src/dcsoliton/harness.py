"""Seeded experiment sweeps, run records and scaling tables.

Sweep config (JSON)::

    {
      "masks": ["2d-r2-balanced", {"id": "mine", "path": "masks/mine.mask"}],
      "dims": [[30, 30], [40, 40]],     # or a single [70, 70]
      "boundary": "PP",                  # P = periodic, O = open, per axis
      "n_points": [8, 12],               # or a single integer
      "seeds": [1, 2, 3],                # or {"start": 0, "count": 50}
      "max_steps": 100000,
      "analyses": ["mcl", "events"],     # also "integral", "superriver"
      "early_screen": 200,               # optional SuperRiver horizon
      "skip_unscreened": false,          # skip runs without an early SuperRiver
      "event_theta": 5, "event_window": 50,
      "records_dir": "runs/"             # optional per-run JSON records
    }

Relative mask paths and ``records_dir`` resolve against the config file.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .analysis import NotReturnedError, integral_series, mcl_lambda
from .engine import DEFAULT_MAX_STEPS, RunOutcome, Trajectory, detect_superriver_early, run_to_mirror
from .lattice import Grid, Mask, format_boundary, parse_boundary, parse_mask, random_initial, resolve_mask
from .structures import DEFAULT_THETA, DEFAULT_WINDOW, detect_local_reversals

log = logging.getLogger(__name__)

RECORD_FORMAT = "dcs-run/1"
ANALYSES = ("mcl", "events", "integral", "superriver")
CSV_COLUMNS = ["mask_id", "seed", "dims", "n_points", "returned", "t_half", "lambda",
               "local_reversal_count", "superriver_early", "error"]


class ConfigError(ValueError):
    pass


def format_dims(dims: Sequence[int]) -> str:
    return "x".join(str(int(e)) for e in dims)


def parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(e) for e in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"bad size {text!r}; expected e.g. 70x70") from None
    if not dims or min(dims) < 1:
        raise ValueError(f"bad size {text!r}")
    return dims


@dataclass(frozen=True)
class RunSpec:
    mask_id: str
    mask_text: str
    dims: tuple[int, ...]
    boundary: str
    n_points: int
    seed: int
    max_steps: int = DEFAULT_MAX_STEPS
    analyses: tuple[str, ...] = ("mcl", "events")
    early_screen: int | None = None
    skip_unscreened: bool = False
    event_theta: int = DEFAULT_THETA
    event_window: int = DEFAULT_WINDOW

    @property
    def sort_key(self):
        return (self.mask_id, self.seed, self.dims, self.n_points)

    def mask(self) -> Mask:
        return parse_mask(self.mask_text, name=self.mask_id)


@dataclass
class SweepConfig:
    masks: list[tuple[str, Mask]]
    dims: list[tuple[int, ...]]
    boundary: str
    n_points: list[int]
    seeds: list[int]
    max_steps: int = DEFAULT_MAX_STEPS
    analyses: tuple[str, ...] = ("mcl", "events")
    early_screen: int | None = None
    skip_unscreened: bool = False
    event_theta: int = DEFAULT_THETA
    event_window: int = DEFAULT_WINDOW
    records_dir: Path | None = None

    @classmethod
    def from_dict(cls, raw: dict[str, Any], base: Path | None = None) -> "SweepConfig":
        base = base or Path(".")
        known = {"masks", "dims", "boundary", "n_points", "seeds", "max_steps", "analyses",
                 "early_screen", "skip_unscreened", "event_theta", "event_window", "records_dir"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("masks", "dims", "n_points", "seeds"):
            if key not in raw:
                raise ConfigError(f"config is missing {key!r}")
        masks = []
        for entry in raw["masks"]:
            if isinstance(entry, str):
                ref = base / entry if (base / entry).exists() else entry
                mask = resolve_mask(ref)
                masks.append((mask.name or str(entry), mask))
            elif isinstance(entry, dict) and "path" in entry:
                mask = resolve_mask(base / entry["path"] if (base / entry["path"]).exists() else entry["path"])
                masks.append((str(entry.get("id", mask.name)), mask))
            else:
                raise ConfigError(f"bad mask entry {entry!r}")
        ids = [m for m, _ in masks]
        if len(set(ids)) != len(ids):
            raise ConfigError("mask ids must be distinct")
        dims = raw["dims"]
        if dims and isinstance(dims[0], int):
            dims = [dims]
        dims = [tuple(int(e) for e in d) for d in dims]
        for d in dims:
            if any(len(d) != m.dim for _, m in masks):
                raise ConfigError(f"dims {d} do not match every mask's dimension")
        n_points = raw["n_points"]
        n_points = [int(n_points)] if isinstance(n_points, int) else [int(n) for n in n_points]
        seeds = raw["seeds"]
        if isinstance(seeds, dict):
            seeds = list(range(int(seeds.get("start", 0)), int(seeds.get("start", 0)) + int(seeds["count"])))
        seeds = [int(s) for s in seeds]
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds must be distinct")
        ndim = len(dims[0])
        boundary = raw.get("boundary", "P" * ndim)
        if len(parse_boundary(boundary)) != ndim:
            raise ConfigError("boundary needs one flag per axis")
        analyses = tuple(raw.get("analyses", ("mcl", "events")))
        bad = set(analyses) - set(ANALYSES)
        if bad:
            raise ConfigError(f"unknown analyses {sorted(bad)}; choose from {ANALYSES}")
        records = raw.get("records_dir")
        return cls(
            masks=masks, dims=dims, boundary=boundary.upper(), n_points=n_points, seeds=seeds,
            max_steps=int(raw.get("max_steps", DEFAULT_MAX_STEPS)), analyses=analyses,
            early_screen=raw.get("early_screen"), skip_unscreened=bool(raw.get("skip_unscreened", False)),
            event_theta=int(raw.get("event_theta", DEFAULT_THETA)),
            event_window=int(raw.get("event_window", DEFAULT_WINDOW)),
            records_dir=(base / records) if records else None,
        )

    @classmethod
    def load(cls, path: str | Path) -> "SweepConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(raw, base=path.parent)

    def specs(self) -> list[RunSpec]:
        out = [
            RunSpec(mask_id, mask.to_text(), d, self.boundary, n, seed, self.max_steps,
                    self.analyses, self.early_screen, self.skip_unscreened,
                    self.event_theta, self.event_window)
            for mask_id, mask in self.masks
            for d in self.dims
            for n in self.n_points
            for seed in self.seeds
        ]
        return sorted(out, key=lambda s: s.sort_key)


@dataclass
class SweepRow:
    mask_id: str
    seed: int
    dims: tuple[int, ...]
    n_points: int
    returned: bool
    t_half: int | None
    lambda_: int | None
    local_reversal_count: int | None
    superriver_early: bool | None
    wall_ms: float = field(default=0.0, compare=False)
    error: str = ""

    def csv_values(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            return str(v)
        return [self.mask_id, str(self.seed), format_dims(self.dims), str(self.n_points),
                fmt(self.returned), fmt(self.t_half), fmt(self.lambda_),
                fmt(self.local_reversal_count), fmt(self.superriver_early), self.error]


# ------------------------------------------------------------ run records

def digest_array(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=np.int64).tobytes()).hexdigest()


def build_record(mask_id: str, mask: Mask, start: Grid, outcome: RunOutcome,
                 n_points: int | None = None, seed: int | None = None,
                 max_steps: int | None = None) -> dict[str, Any]:
    return {
        "format": RECORD_FORMAT,
        "mask": {"id": mask_id, "text": mask.to_text()},
        "dims": list(start.dims),
        "boundary": format_boundary(start.periodic),
        "n_points": n_points,
        "seed": seed,
        "max_steps": max_steps,
        "start": start.to_text(),
        "returned": outcome.returned,
        "t_half": outcome.t_half,
        "t_end": outcome.t_end,
        "nc_series": [int(x) for x in outcome.nc_series],
        "final_checksum": outcome.final_checksum,
        "analysis": {},
        "timing": {"wall_ms": round(outcome.wall_time * 1000, 3)},
    }


def load_record(path: str | Path) -> dict[str, Any]:
    try:
        rec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not a run record ({exc})") from None
    if rec.get("format") != RECORD_FORMAT:
        raise ValueError(f"{path}: unsupported record format {rec.get('format')!r}")
    return rec


def trajectory_from_record(rec: dict[str, Any]) -> Trajectory:
    mask = parse_mask(rec["mask"]["text"], name=rec["mask"]["id"])
    start = Grid.from_text(rec["start"])
    nc = np.array(rec["nc_series"], dtype=np.int64)
    outcome = RunOutcome(bool(rec["returned"]), rec["t_half"], nc, 0.0, rec["final_checksum"])
    return Trajectory(start, mask, outcome)


def write_record(rec: dict[str, Any], path: str | Path):
    Path(path).write_text(json.dumps(rec, indent=1, sort_keys=True) + "\n")


def analyze_record(rec: dict[str, Any], analyses: Iterable[str], theta: int = DEFAULT_THETA,
                   window: int = DEFAULT_WINDOW, traj: Trajectory | None = None) -> dict[str, Any]:
    """Run the named analyses and store results under ``rec["analysis"]``.

    Raises ``NotReturnedError`` when MCL is requested on an open run.
    """
    traj = traj or trajectory_from_record(rec)
    out = rec.setdefault("analysis", {})
    analyses = set(analyses)
    if "mcl" in analyses:
        res = mcl_lambda(traj)
        out["lambda"] = res.lam
        out["mcl_all_equal"] = res.all_equal
        out["mcl_divisible_by_4"] = res.divisible_by_4
        out["per_cell_sums_digest"] = digest_array(res.per_cell_sums)
        out["per_cell_sums_range"] = [int(res.per_cell_sums.min()), int(res.per_cell_sums.max())]
    if "integral" in analyses:
        S = integral_series(traj)
        out["S"] = [float(x) for x in S]
    if "events" in analyses:
        nc = traj.outcome.nc_series
        events = detect_local_reversals(nc[1:], theta, window, t_offset=1)
        out["events"] = [[e.t, e.phase, e.nc_value] for e in events]
    if "superriver" in analyses:
        out["superriver_early"] = detect_superriver_early(traj.start, traj.mask)
    return rec


# ------------------------------------------------------------- execution

def run_experiment(spec: RunSpec) -> tuple[SweepRow, dict[str, Any] | None]:
    """One cell of a sweep.  Analysis failures land in ``row.error``."""
    t0 = time.perf_counter()
    row = SweepRow(spec.mask_id, spec.seed, spec.dims, spec.n_points, False, None, None, None, None)
    try:
        mask = spec.mask()
        start = random_initial(spec.dims, spec.n_points, spec.seed, parse_boundary(spec.boundary))
    except ValueError as exc:
        row.error = str(exc)
        return row, None
    if spec.early_screen or "superriver" in spec.analyses:
        row.superriver_early = detect_superriver_early(start, mask, spec.early_screen or 200)
        if spec.skip_unscreened and not row.superriver_early:
            row.error = "skipped: no early SuperRiver"
            row.wall_ms = (time.perf_counter() - t0) * 1000
            return row, None
    outcome = run_to_mirror(start, mask, spec.max_steps)
    row.returned = outcome.returned
    row.t_half = outcome.t_half
    rec = build_record(spec.mask_id, mask, start, outcome, spec.n_points, spec.seed, spec.max_steps)
    traj = Trajectory(start, mask, outcome)
    wanted = [a for a in spec.analyses if a != "superriver"]
    if not outcome.returned:
        wanted = [a for a in wanted if a != "mcl"]
    try:
        analyze_record(rec, wanted, spec.event_theta, spec.event_window, traj=traj)
    except (ValueError, NotReturnedError) as exc:
        row.error = f"analysis failed: {exc}"
    a = rec["analysis"]
    if "lambda" in a:
        row.lambda_ = a["lambda"]
        if a["lambda"] is None:
            row.error = row.error or "MCL violated: per-cell sums differ or are not multiples of 4"
    if "events" in a:
        row.local_reversal_count = len(a["events"])
    if row.superriver_early is not None:
        a["superriver_early"] = row.superriver_early
    row.wall_ms = (time.perf_counter() - t0) * 1000
    rec["timing"]["wall_ms"] = round(row.wall_ms, 3)
    return row, rec


def _run_quiet(spec: RunSpec):
    return run_experiment(spec)


def sweep(config: SweepConfig, jobs: int = 1) -> list[SweepRow]:
    """Run the full cross product; rows come back sorted by (mask_id, seed, ...)."""
    specs = config.specs()
    if jobs <= 1:
        results = [run_experiment(s) for s in specs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_quiet, specs, chunksize=1))
    rows = []
    for spec, (row, rec) in zip(specs, results):
        if row.error:
            log.warning("%s seed=%s: %s", spec.mask_id, spec.seed, row.error)
        if config.records_dir is not None and rec is not None:
            config.records_dir.mkdir(parents=True, exist_ok=True)
            name = f"{spec.mask_id}_{format_dims(spec.dims)}_n{spec.n_points}_s{spec.seed}.json"
            write_record(rec, config.records_dir / name)
        rows.append(row)
    rows.sort(key=lambda r: (r.mask_id, r.seed, r.dims, r.n_points))
    return rows


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def timing_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mask_id", "seed", "dims", "n_points", "wall_ms"])
    for r in rows:
        w.writerow([r.mask_id, r.seed, format_dims(r.dims), r.n_points, f"{r.wall_ms:.3f}"])
    return buf.getvalue()


def write_results(rows: Sequence[SweepRow], out: str | Path):
    """Deterministic CSV at ``out``; wall times go to ``<out>.timing.csv``."""
    out = Path(out)
    out.write_text(rows_to_csv(rows))
    out.with_name(out.name + ".timing.csv").write_text(timing_csv(rows))


def read_results(path: str | Path) -> list[SweepRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            opt = lambda v, f: f(v) if v != "" else None
            rows.append(SweepRow(
                rec["mask_id"], int(rec["seed"]), parse_dims(rec["dims"]), int(rec["n_points"]),
                rec["returned"] == "true", opt(rec["t_half"], int), opt(rec["lambda"], int),
                opt(rec["local_reversal_count"], int), opt(rec["superriver_early"], lambda v: v == "true"),
                error=rec.get("error", "")))
    return rows


# -------------------------------------------------------------- scaling

@dataclass
class ScalingEntry:
    dims: tuple[int, ...]
    runs: int
    returned: int
    median_t_half: int | None
    ratio: float | None
    sufficient: bool


def lower_median(values: Sequence[int]) -> int:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def scaling_report(rows: Sequence[SweepRow], min_returned: int = 10) -> list[ScalingEntry]:
    """Median t_half per lattice size (by cell count) and ratios between neighbours.

    Sizes with fewer than ``min_returned`` returned runs are flagged
    insufficient and break the ratio chain.
    """
    by_size: dict[tuple[int, ...], list[SweepRow]] = {}
    for r in rows:
        by_size.setdefault(tuple(r.dims), []).append(r)
    entries = []
    prev = None
    for dims in sorted(by_size, key=lambda d: (int(np.prod(d)), d)):
        group = by_size[dims]
        halves = [r.t_half for r in group if r.returned and r.t_half is not None]
        med = lower_median(halves) if halves else None
        ok = len(halves) >= min_returned
        ratio = None
        if ok and prev is not None and prev.sufficient and prev.median_t_half:
            ratio = med / prev.median_t_half
        entry = ScalingEntry(dims, len(group), len(halves), med, ratio, ok)
        entries.append(entry)
        prev = entry
    return entries


def scaling_csv(entries: Sequence[ScalingEntry]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dims", "runs", "returned", "median_t_half", "ratio", "sufficient"])
    for e in entries:
        w.writerow([format_dims(e.dims), e.runs, e.returned, "" if e.median_t_half is None else e.median_t_half,
                    "" if e.ratio is None else f"{e.ratio:.3f}", "true" if e.sufficient else "false"])
    return buf.getvalue()
