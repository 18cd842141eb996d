"""Six-frame filters: A-count, boundary changes and A-coincidence.

A window ``W(t)`` holds frames ``t-2 .. t+3`` and is drawn in the gap between
frames ``t`` and ``t+1``.  With this convention ``A_F(0)`` and
``A_F(t_half)`` are even everywhere and every filter is (anti)symmetric
about the mirror point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .engine import Trajectory

WINDOW_BEFORE = 2
WINDOW_AFTER = 3
WINDOW_LEN = WINDOW_BEFORE + WINDOW_AFTER + 1


class Pattern(enum.IntEnum):
    OTHER = 0
    BANK = 1   # rotations of CBCBAA, period 6
    RIVER = 2  # rotations of CBACBA, period 3


BANK_WORD = "CBCBAA"
RIVER_WORD = "CBACBA"


def _rotations(word: str) -> set[str]:
    return {word[k:] + word[:k] for k in range(len(word))}


def _word_code(states) -> int:
    code = 0
    for s in states:
        code = 3 * code + int(s)
    return code


def _build_lookup() -> np.ndarray:
    table = np.zeros(3 ** 6, dtype=np.uint8)
    codes = {"A": 0, "B": 1, "C": 2}
    for word, cls in ((BANK_WORD, Pattern.BANK), (RIVER_WORD, Pattern.RIVER)):
        for rot in _rotations(word):
            table[_word_code(codes[ch] for ch in rot)] = cls
    return table


_PATTERN_LOOKUP = _build_lookup()
_POW3 = 3 ** np.arange(5, -1, -1)


def classify_cell_pattern(states) -> Pattern:
    """Classify a six-frame temporal word (cyclic rotations only)."""
    states = [int(s) for s in states]
    if len(states) != 6:
        raise ValueError("need exactly six states")
    return Pattern(int(_PATTERN_LOOKUP[_word_code(states)]))


@dataclass(frozen=True, eq=False)
class FrameWindow:
    center_gap: int
    frames: np.ndarray  # (6, *dims) uint8
    periodic: tuple[bool, ...]

    def __post_init__(self):
        if self.frames.shape[0] != WINDOW_LEN:
            raise ValueError("a filter window holds exactly six frames")

    def frame(self, t: int) -> np.ndarray:
        """Cells at absolute time ``t`` (must lie inside the window)."""
        k = t - self.center_gap + WINDOW_BEFORE
        if not 0 <= k < WINDOW_LEN:
            raise IndexError(f"time {t} outside window around {self.center_gap}")
        return self.frames[k]


def frame_window(traj: Trajectory, t: int) -> FrameWindow:
    frames = np.stack([c for _, c in traj.iter_cells(t - WINDOW_BEFORE, t + WINDOW_AFTER)])
    return FrameWindow(t, frames, traj.start.periodic)


@dataclass(frozen=True, eq=False)
class AFilterField:
    values: np.ndarray         # 0..6
    pattern_class: np.ndarray  # Pattern codes, non-OTHER only where value == 2

    @property
    def is_river(self) -> np.ndarray:
        return self.pattern_class == Pattern.RIVER

    @property
    def is_bank(self) -> np.ndarray:
        return self.pattern_class == Pattern.BANK


def a_filter_cells(frames: np.ndarray) -> AFilterField:
    values = (frames == 0).sum(axis=0).astype(np.int8)
    codes = np.tensordot(_POW3, frames.astype(np.int64), axes=(0, 0))
    pattern = np.where(values == 2, _PATTERN_LOOKUP[codes], Pattern.OTHER).astype(np.uint8)
    return AFilterField(values, pattern)


def a_filter(window: FrameWindow) -> AFilterField:
    return a_filter_cells(window.frames)


@dataclass(frozen=True, eq=False)
class BFilterField:
    """Signed boundary change across the faces ``v | v + e_axis``.

    Along a periodic axis ``values`` has the full extent (the last entry is
    the wrap face); along an open axis the rim face is dropped.
    """

    i: int
    axis: int
    values: np.ndarray  # int8 in {-1, 0, 1}


def boundary_indicator(cells: np.ndarray, axis: int, periodic) -> np.ndarray:
    """1 where the face between v and v + e_axis separates unequal states."""
    if periodic[axis]:
        return (cells != np.roll(cells, -1, axis=axis)).astype(np.int8)
    n = cells.shape[axis]
    lo = np.take(cells, range(0, n - 1), axis=axis)
    hi = np.take(cells, range(1, n), axis=axis)
    return (lo != hi).astype(np.int8)


def _check_index(i: int):
    if i not in (0, 1, 2):
        raise ValueError("filter index i must be 0, 1 or 2")


def b_filter(window: FrameWindow, i: int, axis: int) -> BFilterField:
    _check_index(i)
    t = window.center_gap
    before = boundary_indicator(window.frame(t - i), axis, window.periodic)
    after = boundary_indicator(window.frame(t + 1 + i), axis, window.periodic)
    return BFilterField(i, axis, (before - after).astype(np.int8))


@dataclass(frozen=True, eq=False)
class CFilterField:
    i: int
    values: np.ndarray  # 0/1


def c_filter(window: FrameWindow, i: int) -> CFilterField:
    _check_index(i)
    t = window.center_gap
    a0 = window.frame(t - i) == 0
    a1 = window.frame(t + 1 + i) == 0
    return CFilterField(i, (a0 ^ a1).astype(np.uint8))


def b_filters(window: FrameWindow, i: int) -> list[BFilterField]:
    return [b_filter(window, i, j) for j in range(window.frames.ndim - 1)]

