"""Emergent objects: river components with torus winding, NullRivers, and
local time-reversal events in the N_C series."""

from __future__ import annotations

import csv
import io
import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .engine import Trajectory
from .filters import AFilterField, boundary_indicator
from .lattice import neighbor


class WindingUnionFind:
    """Union-find whose nodes carry an integer lift vector relative to the root.

    ``union(a, b, k)`` records that the copy of ``b`` adjacent to ``a`` in the
    universal cover sits ``k`` periods away.  Joining two nodes that are
    already connected with an inconsistent lift closes a non-contractible
    loop; the mismatch vector marks the wound axes of that component.
    """

    def __init__(self, d: int):
        self.d = d
        self.parent: dict = {}
        self.lift: dict = {}  # node -> lift relative to parent
        self.wraps: dict = {}  # root -> per-axis flags

    def add(self, node):
        if node not in self.parent:
            self.parent[node] = node
            self.lift[node] = (0,) * self.d
            self.wraps[node] = [False] * self.d

    def find(self, node):
        path = []
        while self.parent[node] != node:
            path.append(node)
            node = self.parent[node]
        root = node
        # compress, accumulating lifts from the top of the path down
        acc = (0,) * self.d
        for n in reversed(path):
            acc = tuple(x + y for x, y in zip(acc, self.lift[n]))
            self.lift[n] = acc
            self.parent[n] = root
        return root

    def union(self, a, b, k: Sequence[int]):
        ra, rb = self.find(a), self.find(b)
        la, lb = self.lift[a], self.lift[b]
        # want lift(b) == lift(a) + k
        if ra == rb:
            diff = [lb_i - la_i - k_i for la_i, lb_i, k_i in zip(la, lb, k)]
            for j, x in enumerate(diff):
                if x:
                    self.wraps[ra][j] = True
            return
        # attach rb under ra: lift(rb) = la + k - lb
        self.parent[rb] = ra
        self.lift[rb] = tuple(x + y - z for x, y, z in zip(la, k, lb))
        self.wraps[ra] = [x or y for x, y in zip(self.wraps[ra], self.wraps.pop(rb))]

    def components(self):
        groups: dict = {}
        for node in self.parent:
            groups.setdefault(self.find(node), []).append(node)
        return groups


@dataclass
class RiverComponent:
    id: int
    members: list[tuple[int, ...]]
    wraps: tuple[bool, ...]

    @property
    def size(self) -> int:
        return len(self.members)


def moore_offsets(d: int) -> list[tuple[int, ...]]:
    return [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)]


def label_components(cells: np.ndarray, periodic: Sequence[bool]) -> list[RiverComponent]:
    """Moore-connected components of a boolean lattice, with winding flags."""
    dims = cells.shape
    d = len(dims)
    uf = WindingUnionFind(d)
    members = [tuple(int(c) for c in v) for v in zip(*np.nonzero(cells))]
    for v in members:
        uf.add(v)
    # half of the Moore offsets suffices: each edge is visited once
    forward = [o for o in moore_offsets(d) if o > (0,) * d]
    for v in members:
        for o in forward:
            raw = [vi + oi for vi, oi in zip(v, o)]
            k = []
            ok = True
            for j, (x, n) in enumerate(zip(raw, dims)):
                q, r = divmod(x, n)
                if q and not periodic[j]:
                    ok = False
                    break
                raw[j] = r
                k.append(q)
            if not ok:
                continue
            u = tuple(raw)
            if u in uf.parent:
                uf.union(v, u, k)
    out = []
    groups = sorted(uf.components().items(), key=lambda kv: min(kv[1]))
    for i, (root, nodes) in enumerate(groups):
        out.append(RiverComponent(i, sorted(nodes), tuple(uf.wraps[root])))
    return out


def label_river_components(af: AFilterField, periodic: Sequence[bool]) -> list[RiverComponent]:
    return label_components(af.is_river, periodic)


def has_superriver(af: AFilterField, periodic: Sequence[bool]) -> bool:
    return any(any(c.wraps) for c in label_river_components(af, periodic))


# ---------------------------------------------------------------- NullRivers

NULL_WINDOW_BEFORE = 5
NULL_WINDOW_AFTER = 6
NULL_PERIOD = 12


def minimal_period(frames: np.ndarray) -> np.ndarray:
    """Per-cell smallest p | 12 with the 12-frame word invariant under cyclic shift p."""
    n = frames.shape[0]
    out = np.full(frames.shape[1:], n, dtype=np.int64)
    for p in sorted((p for p in range(1, n) if n % p == 0), reverse=True):
        same = np.all(frames == np.roll(frames, -p, axis=0), axis=0)
        out[same] = p
    return out


@dataclass
class NullRiverSighting:
    cell: tuple[int, ...]
    window_start: int
    # outline[k, f]: signed change on face f of the cell between frames k, k+1 (cyclic)
    outline: np.ndarray
    footprint_outline: np.ndarray
    states: tuple[int, ...]

    @property
    def phase(self) -> int:
        return self.window_start % NULL_PERIOD


def _face_outline(frames: np.ndarray, periodic, d: int) -> np.ndarray:
    """(12, 2d, *dims) signed face changes: faces ordered (axis0-, axis0+, axis1-, ...)."""
    nxt = np.roll(frames, -1, axis=0)
    faces = []
    for j in range(d):
        plus_before = np.stack([_full_indicator(f, j, periodic) for f in frames])
        plus_after = np.stack([_full_indicator(f, j, periodic) for f in nxt])
        change = plus_before - plus_after
        minus = neighbor(change, tuple(-1 if i == j else 0 for i in range(d)), periodic, 0, axes_from=1)
        faces += [minus, change]
    return np.stack(faces, axis=1).astype(np.int8)


def _full_indicator(cells, axis, periodic):
    ind = boundary_indicator(cells, axis, periodic)
    if ind.shape[axis] == cells.shape[axis]:
        return ind
    pad = [(0, 0)] * cells.ndim
    pad[axis] = (0, 1)
    return np.pad(ind, pad)


def nullrivers_in_frames(frames: np.ndarray, periodic, window_start: int,
                         offsets: Sequence[Sequence[int]], radius: int) -> list[NullRiverSighting]:
    if frames.shape[0] != NULL_PERIOD:
        raise ValueError("NullRiver detection needs exactly 12 frames")
    d = frames.ndim - 1
    period = minimal_period(frames)
    candidate = period == NULL_PERIOD
    if not candidate.any():
        return []
    calm = (6 % period) == 0
    quiet = np.ones_like(calm)
    for o in itertools.product(range(-radius, radius + 1), repeat=d):
        if any(o):
            quiet &= neighbor(calm, o, periodic, True)
    hits = candidate & quiet
    if not hits.any():
        return []
    outline = _face_outline(frames, periodic, d)
    out = []
    for v in zip(*np.nonzero(hits)):
        v = tuple(int(c) for c in v)
        foot = []
        for o in offsets:
            u = []
            for vi, oi, n, per in zip(v, o, frames.shape[1:], periodic):
                x = vi + oi
                u.append(x % n if per else min(max(x, 0), n - 1))
            foot.append(outline[(slice(None), slice(None)) + tuple(u)])
        out.append(NullRiverSighting(
            v, window_start, outline[(slice(None), slice(None)) + v].copy(),
            np.stack(foot, axis=1), tuple(int(s) for s in frames[(slice(None),) + v])))
    return out


def detect_nullrivers(traj: Trajectory, t: int, radius: int | None = None) -> list[NullRiverSighting]:
    """Isolated period-12 cells in frames ``t-5 .. t+6`` whose Chebyshev
    ``radius``-neighbourhood (default: mask rank) has periods dividing 6."""
    radius = traj.mask.rank if radius is None else radius
    t0 = t - NULL_WINDOW_BEFORE
    frames = np.stack([c for _, c in traj.iter_cells(t0, t + NULL_WINDOW_AFTER)])
    return nullrivers_in_frames(frames, traj.start.periodic, t0, traj.mask.offsets, radius)


@dataclass
class SignatureStats:
    n_sightings: int = 0
    # per phase (0..11) histogram of center-outline patterns
    phase_patterns: list[Counter] = field(default_factory=lambda: [Counter() for _ in range(12)])
    regular: int = 0
    irregular: int = 0
    closed: int = 0
    diagonal_counterexamples: int = 0
    aligned_phase: list[int | None] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phase", "outline", "count"])
        for k, hist in enumerate(self.phase_patterns):
            for pattern, n in sorted(hist.items()):
                w.writerow([k + 1, pattern, n])
        w.writerow([])
        w.writerow(["sightings", "regular", "irregular", "closed", "diagonal_counterexamples"])
        w.writerow([self.n_sightings, self.regular, self.irregular, self.closed,
                    self.diagonal_counterexamples])
        return buf.getvalue()


def _pattern_str(face_values) -> str:
    return "".join({-1: "w", 0: ".", 1: "k"}[int(x)] for x in face_values)


def _white(face_values) -> frozenset:
    return frozenset(i for i, x in enumerate(face_values) if x == -1)


def _regular_at(outline: np.ndarray, r: int) -> bool:
    # frames counted 1..12 from alignment r
    f = lambda n: outline[(r + n - 1) % NULL_PERIOD]
    two, five, nine, twelve = f(2), f(5), f(9), f(12)
    white_only = not (two > 0).any() and not (nine > 0).any() and (two < 0).any() and (nine < 0).any()
    return bool(white_only and np.array_equal(twelve, -two) and np.array_equal(five, -nine))


def nullriver_signature_scan(sightings: Sequence[NullRiverSighting]) -> SignatureStats:
    """Tabulate center outlines per phase and test the observed regularities.

    A sighting is *regular* if some cyclic alignment puts white-only outlines
    at frames 2 and 9, frame 12 opposite to frame 2 and frame 5 opposite to
    frame 9.  For regular sightings, *closed* means the white faces of frames
    2 and 9 together cover every face; a *diagonal counterexample* is one
    where frames 2 and 9 are each a corner (one face per axis) and
    complementary.
    """
    stats = SignatureStats()
    for s in sightings:
        stats.n_sightings += 1
        outline = s.outline
        aligned = next((r for r in range(NULL_PERIOD) if _regular_at(outline, r)), None)
        stats.aligned_phase.append(aligned)
        r = aligned if aligned is not None else 0
        for k in range(NULL_PERIOD):
            stats.phase_patterns[k][_pattern_str(outline[(r + k) % NULL_PERIOD])] += 1
        if aligned is None:
            stats.irregular += 1
            continue
        stats.regular += 1
        nfaces = outline.shape[1]
        w2 = _white(outline[(r + 1) % NULL_PERIOD])
        w9 = _white(outline[(r + 8) % NULL_PERIOD])
        if w2 | w9 == frozenset(range(nfaces)):
            stats.closed += 1
        d = nfaces // 2
        corner = lambda w: len(w) == d and all(len(w & {2 * j, 2 * j + 1}) == 1 for j in range(d))
        if corner(w2) and corner(w9) and not (w2 & w9):
            stats.diagonal_counterexamples += 1
    return stats


# ------------------------------------------------------ local time reversal

DEFAULT_THETA = 5
DEFAULT_WINDOW = 50


@dataclass(frozen=True)
class LocalReversalEvent:
    t: int
    phase: int
    nc_value: int


def detect_local_reversals(nc_series: Sequence[int], theta: int = DEFAULT_THETA,
                           window: int = DEFAULT_WINDOW, t_offset: int = 0) -> list[LocalReversalEvent]:
    """Times where N_C <= theta and equals its minimum over [t-w, t+w].

    Runs of consecutive qualifying times collapse to their first minimum.
    A terminal zero (the mirror point) is always reported as the last event.
    ``t_offset`` is added to reported times (for series that skip t=0).
    """
    nc = np.asarray(nc_series, dtype=np.int64)
    n = len(nc)
    if n == 0:
        return []
    big = np.iinfo(np.int64).max
    padded = np.concatenate([np.full(window, big), nc, np.full(window, big)])
    local_min = sliding_window_view(padded, 2 * window + 1).min(axis=1)
    qualify = (nc <= theta) & (nc == local_min)
    events = []
    t = 0
    while t < n:
        if not qualify[t]:
            t += 1
            continue
        end = t
        while end + 1 < n and qualify[end + 1]:
            end += 1
        best = t + int(np.argmin(nc[t:end + 1]))
        if end == n - 1 and nc[-1] == 0:
            best = n - 1
        events.append(best)
        t = end + 1
    if nc[-1] == 0 and (not events or events[-1] != n - 1):
        events.append(n - 1)
    return [LocalReversalEvent(e + t_offset, (e + t_offset) % 3, int(nc[e])) for e in events]
