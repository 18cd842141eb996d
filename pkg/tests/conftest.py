import functools
import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from dcsoliton import Grid, Mask, Trajectory, bundled_mask, random_initial, run_to_mirror
from dcsoliton.lattice import apply_symmetry, cube_symmetries


def symmetric_closure(reps, d):
    out = set()
    for o in reps:
        for perm, signs in cube_symmetries(d):
            out.add(apply_symmetry(o, perm, signs))
    return out


@st.composite
def masks(draw, dims=(1, 2, 3), max_rank=2):
    d = draw(st.sampled_from(dims))
    r = draw(st.integers(1, max_rank))
    # orbit representatives: sorted non-negative offsets
    reps = [o for o in itertools.product(range(r + 1), repeat=d) if list(o) == sorted(o) and any(o)]
    chosen = draw(st.lists(st.sampled_from(reps), min_size=1, max_size=3, unique=True))
    if draw(st.booleans()):
        chosen.append((0,) * d)
    return Mask.from_offsets(symmetric_closure(chosen, d))


@st.composite
def grids_for(draw, mask, max_extent=8, min_extent=2):
    dims = tuple(draw(st.integers(min_extent, max_extent)) for _ in range(mask.dim))
    periodic = tuple(draw(st.booleans()) for _ in range(mask.dim))
    n = int(np.prod(dims))
    cells = draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
    return Grid(np.array(cells, dtype=np.uint8).reshape(dims), periodic)


@st.composite
def mask_and_grid(draw, dims=(1, 2, 3), max_rank=2, max_extent=8):
    mask = draw(masks(dims, max_rank))
    extent = max_extent if mask.dim < 3 else min(max_extent, 6)
    return mask, draw(grids_for(mask, extent))


def random_grid(rng, dims, periodic=None):
    return Grid(rng.integers(0, 3, size=dims, dtype=np.uint8), periodic)


@functools.lru_cache(maxsize=None)
def returned_run(mask_name, dims, n_points, seed, periodic=None, max_steps=100_000):
    mask = bundled_mask(mask_name)
    start = random_initial(dims, n_points, seed, periodic)
    outcome = run_to_mirror(start, mask, max_steps)
    return Trajectory(start, mask, outcome)


# small closed runs used across modules (moore 12x12, 4 points)
SMALL_RUNS = [("2d-r1-moore", (12, 12), 4, s) for s in range(3)]


@pytest.fixture(params=SMALL_RUNS, ids=lambda p: f"{p[0]}-s{p[3]}")
def small_run(request):
    traj = returned_run(*request.param)
    assert traj.t_half is not None
    return traj


@pytest.fixture
def moore():
    return bundled_mask("2d-r1-moore")


@pytest.fixture
def vonneumann():
    return bundled_mask("2d-r1-vonneumann")


# acceptance lines are collected here and echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(criterion, ok, detail):
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
