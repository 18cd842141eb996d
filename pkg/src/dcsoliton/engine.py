"""Forward/backward evolution, mirror detection and trajectory replay.

Transition laws (fixed)::

    law I   (no C under the mask):  A->A  B->C  C->B
    law II  (some C under the mask): A->C  B->A  C->B

Stepping runs on packed bit planes (see ``_bitplane``); ``reference``
keeps an unpacked implementation that the tests compare against.
"""

from __future__ import annotations

import hashlib
import time
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

from . import _bitplane as bp
from .lattice import Grid, Mask, count_states

LAW_I = np.array([0, 2, 1], dtype=np.uint8)
LAW_II = np.array([2, 0, 1], dtype=np.uint8)

DEFAULT_MAX_STEPS = 100_000


@dataclass(frozen=True)
class Rule:
    law_I: tuple[int, int, int] = tuple(LAW_I.tolist())
    law_II: tuple[int, int, int] = tuple(LAW_II.tolist())


RULE = Rule()


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class _Plan:
    dims: tuple[int, ...]
    row_maps: np.ndarray
    dx_index: np.ndarray
    dx_values: np.ndarray
    width: int
    periodic_last: bool
    tail: np.ndarray


@lru_cache(maxsize=64)
def _plan(dims: tuple[int, ...], periodic: tuple[bool, ...], mask: Mask) -> _Plan:
    if mask.dim != len(dims):
        raise DimensionMismatch(f"{mask.dim}-d mask on a {len(dims)}-d grid")
    offsets = mask.as_array()
    lead = dims[:-1]
    if lead:
        coords = np.indices(lead).reshape(len(lead), -1).T
    else:
        coords = np.zeros((1, 0), dtype=np.int64)
    row_maps = np.empty((len(offsets), coords.shape[0]), dtype=np.int64)
    strides = np.array([int(np.prod(lead[j + 1:])) for j in range(len(lead))], dtype=np.int64)
    for m, o in enumerate(offsets):
        tgt = coords + o[:-1]
        ok = np.ones(coords.shape[0], dtype=bool)
        for j, (n, per) in enumerate(zip(lead, periodic[:-1])):
            if per:
                tgt[:, j] %= n
            else:
                ok &= (tgt[:, j] >= 0) & (tgt[:, j] < n)
        flat = (np.clip(tgt, 0, None) * strides).sum(axis=1) if lead else np.zeros(1, np.int64)
        row_maps[m] = np.where(ok, flat, -1)
    dx_values, dx_index = np.unique(offsets[:, -1], return_inverse=True)
    return _Plan(dims, row_maps, dx_index.astype(np.int64).ravel(), dx_values.astype(np.int64),
                 dims[-1], bool(periodic[-1]), bp.tail_mask(dims[-1]))


class PackedState:
    """Mutable packed copy of a grid for fast stepping."""

    def __init__(self, grid: Grid, mask: Mask):
        self.dims = grid.dims
        self.periodic = grid.periodic
        self.mask = mask
        self.plan = _plan(grid.dims, grid.periodic, mask)
        self.b = bp.pack(grid.cells == 1)
        self.c = bp.pack(grid.cells == 2)
        rows, nw = self.b.shape
        self._shifted = np.zeros((len(self.plan.dx_values), rows, nw), dtype=np.uint64)
        self._p = np.zeros((rows, nw), dtype=np.uint64)
        self._b2 = np.zeros_like(self.b)
        self._c2 = np.zeros_like(self.c)

    def _step(self):
        pl = self.plan
        bp.step(self.b, self.c, pl.row_maps, pl.dx_index, pl.dx_values, pl.width,
                pl.periodic_last, pl.tail, self._shifted, self._p, self._b2, self._c2)
        self.b, self._b2 = self._b2, self.b
        self.c, self._c2 = self._c2, self.c

    def forward(self, n: int = 1):
        if n == 1:
            self._step()
            return
        pl = self.plan
        bp.evolve(self.b, self.c, n, pl.row_maps, pl.dx_index, pl.dx_values, pl.width,
                  pl.periodic_last, pl.tail, False, np.zeros(0, dtype=np.int64))

    def backward(self, n: int = 1):
        # F^-1 = T F T, and T just swaps the B and C planes
        self.b, self.c = self.c, self.b
        self.forward(n)
        self.b, self.c = self.c, self.b

    def n_c(self) -> int:
        return int(bp.popcount_plane(self.c))

    def cells(self) -> np.ndarray:
        out = bp.unpack(self.b, self.dims).astype(np.uint8)
        out[bp.unpack(self.c, self.dims)] = 2
        return out

    def grid(self) -> Grid:
        return Grid(self.cells(), self.periodic)


def c_presence_map(grid: Grid, mask: Mask) -> np.ndarray:
    """Boolean lattice: True where some mask neighbour is in state C."""
    pl = _plan(grid.dims, grid.periodic, mask)
    cplane = bp.pack(grid.cells == 2)
    rows, nw = cplane.shape
    shifted = np.zeros((len(pl.dx_values), rows, nw), dtype=np.uint64)
    out = np.zeros((rows, nw), dtype=np.uint64)
    bp.presence(cplane, pl.row_maps, pl.dx_index, pl.dx_values, pl.width,
                pl.periodic_last, pl.tail, shifted, out)
    return bp.unpack(out, grid.dims)


def step_forward(grid: Grid, mask: Mask) -> Grid:
    state = PackedState(grid, mask)
    state.forward()
    return state.grid()


def step_backward(grid: Grid, mask: Mask) -> Grid:
    state = PackedState(grid, mask)
    state.backward()
    return state.grid()


def evolve(grid: Grid, mask: Mask, n_steps: int) -> Grid:
    """Grid after ``n_steps`` (negative means backward)."""
    state = PackedState(grid, mask)
    if n_steps > 0:
        state.forward(n_steps)
    elif n_steps < 0:
        state.backward(-n_steps)
    return state.grid()


def grid_checksum(grid: Grid) -> str:
    h = hashlib.sha256()
    h.update(repr((grid.dims, grid.periodic)).encode())
    h.update(grid.cells.tobytes())
    return h.hexdigest()


@dataclass
class RunOutcome:
    returned: bool
    t_half: int | None
    nc_series: np.ndarray
    wall_time: float
    final_checksum: str
    t_end: int = field(init=False)

    def __post_init__(self):
        self.t_end = len(self.nc_series) - 1
        if self.returned and (self.t_half is None or self.t_half < 1
                              or self.nc_series[self.t_half] != 0):
            raise ValueError("returned run must end with N_C == 0 at t_half >= 1")


FrameCallback = Callable[[int, Grid], None]


def run_to_mirror(start: Grid, mask: Mask, max_steps: int = DEFAULT_MAX_STEPS,
                  callback: FrameCallback | None = None) -> RunOutcome:
    """Step until the first t >= 1 with no C cells, or ``max_steps``.

    ``callback(t, grid)`` is invoked for t = 0 .. t_end when given; it slows
    the run to one kernel call per step.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    t0 = time.perf_counter()
    state = PackedState(start, mask)
    nc = np.zeros(max_steps + 1, dtype=np.int64)
    nc[0] = count_states(start)[2]
    if callback is None:
        pl = state.plan
        t_end = int(bp.evolve(state.b, state.c, max_steps, pl.row_maps, pl.dx_index,
                              pl.dx_values, pl.width, pl.periodic_last, pl.tail, True, nc))
    else:
        callback(0, start)
        t_end = max_steps
        for t in range(1, max_steps + 1):
            state.forward()
            nc[t] = state.n_c()
            callback(t, state.grid())
            if nc[t] == 0:
                t_end = t
                break
    series = nc[:t_end + 1].copy()
    returned = bool(series[t_end] == 0)
    return RunOutcome(returned, t_end if returned else None, series,
                      time.perf_counter() - t0, grid_checksum(state.grid()))


class Trajectory:
    """Exact replay of the orbit through ``start``; frames are never stored."""

    def __init__(self, start: Grid, mask: Mask, outcome: RunOutcome | None = None):
        self.start = start
        self.mask = mask
        self.outcome = outcome

    @property
    def t_half(self) -> int | None:
        return self.outcome.t_half if self.outcome and self.outcome.returned else None

    def frame(self, t: int) -> Grid:
        return evolve(self.start, self.mask, t)

    def iter_cells(self, t0: int, t1: int) -> Iterator[tuple[int, np.ndarray]]:
        """Yield ``(t, cells)`` for t0 <= t <= t1, cells as uint8 arrays."""
        state = PackedState(self.start, self.mask)
        if t0 < 0:
            state.backward(-t0)
        elif t0 > 0:
            state.forward(t0)
        for t in range(t0, t1 + 1):
            if t > t0:
                state.forward()
            yield t, state.cells()

    def iter_frames(self, t0: int, t1: int) -> Iterator[tuple[int, Grid]]:
        for t, cells in self.iter_cells(t0, t1):
            yield t, Grid(cells, self.start.periodic)

    def windows(self, t0: int, t1: int, before: int = 2, after: int = 3):
        """Sliding stacks of frames ``t-before .. t+after`` for t in [t0, t1]."""
        buf: deque = deque(maxlen=before + after + 1)
        for u, cells in self.iter_cells(t0 - before, t1 + after):
            buf.append(cells)
            if len(buf) == buf.maxlen:
                yield u - after, np.stack(buf)


def detect_superriver_early(start: Grid, mask: Mask, horizon: int = 200,
                            every: int = 3) -> bool:
    """True iff a torus-wrapping river appears in some window within ``horizon`` steps."""
    from .filters import a_filter_cells
    from .structures import label_river_components

    traj = Trajectory(start, mask)
    for t, frames in traj.windows(2, horizon - 3):
        if (t - 2) % every:
            continue
        af = a_filter_cells(frames)
        if not af.is_river.any():
            continue
        for comp in label_river_components(af, start.periodic):
            if any(comp.wraps):
                return True
    return False
