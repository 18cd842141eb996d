"""Slow, obviously-correct stepping used as a cross-check for the fast path."""

from __future__ import annotations

import itertools

import numpy as np

from .lattice import Grid, Mask, neighbor

# law I / law II as plain dicts, independent of the engine tables
_LAW_I = {0: 0, 1: 2, 2: 1}
_LAW_II = {0: 2, 1: 0, 2: 1}


def naive_presence(grid: Grid, mask: Mask) -> np.ndarray:
    """Per-cell loop over mask offsets with explicit wrap / edge handling."""
    cells = grid.cells
    dims = grid.dims
    out = np.zeros(dims, dtype=bool)
    for v in itertools.product(*(range(n) for n in dims)):
        for off in mask.offsets:
            u = []
            for x, o, n, per in zip(v, off, dims, grid.periodic):
                y = x + o
                if per:
                    y %= n
                elif not 0 <= y < n:
                    break
                u.append(y)
            else:
                if cells[tuple(u)] == 2:
                    out[v] = True
                    break
    return out


def naive_step(grid: Grid, mask: Mask) -> Grid:
    pres = naive_presence(grid, mask)
    new = np.empty_like(grid.cells)
    for v in itertools.product(*(range(n) for n in grid.dims)):
        law = _LAW_II if pres[v] else _LAW_I
        new[v] = law[int(grid.cells[v])]
    return grid.with_cells(new)


def reference_step(grid: Grid, mask: Mask) -> Grid:
    """Vectorised over cells, one shifted copy per mask offset."""
    is_c = grid.cells == 2
    pres = np.zeros(grid.dims, dtype=bool)
    for off in mask.offsets:
        pres |= neighbor(is_c, off, grid.periodic, fill=False)
    law1 = np.array([0, 2, 1], dtype=np.uint8)
    law2 = np.array([2, 0, 1], dtype=np.uint8)
    return grid.with_cells(np.where(pres, law2[grid.cells], law1[grid.cells]))


def reference_run(grid: Grid, mask: Mask, n_steps: int) -> list[Grid]:
    frames = [grid]
    for _ in range(n_steps):
        frames.append(reference_step(frames[-1], mask))
    return frames
