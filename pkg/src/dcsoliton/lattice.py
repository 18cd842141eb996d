"""Cell alphabet, lattices on d-dimensional tori, and symmetric masks."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .prng import SplitMix64


class CellState(enum.IntEnum):
    A = 0  # white, quiescent
    B = 1  # blue
    C = 2  # red

    @property
    def char(self) -> str:
        return self.name

    @classmethod
    def from_char(cls, ch: str) -> "CellState":
        try:
            return cls[ch]
        except KeyError:
            raise ValueError(f"not a cell state: {ch!r}") from None


A, B, C = CellState.A, CellState.B, CellState.C

_CHARS = np.array([ord("A"), ord("B"), ord("C")], dtype=np.uint8)
_CODES = np.full(256, 255, dtype=np.uint8)
_CODES[_CHARS] = np.arange(3, dtype=np.uint8)


class GridFormatError(ValueError):
    pass


class MaskFormatError(ValueError):
    pass


def _as_periodic(periodic, ndim: int) -> tuple[bool, ...]:
    if periodic is None:
        return (True,) * ndim
    if isinstance(periodic, str):
        periodic = parse_boundary(periodic)
    if isinstance(periodic, bool):
        return (periodic,) * ndim
    periodic = tuple(bool(p) for p in periodic)
    if len(periodic) != ndim:
        raise ValueError(f"boundary has {len(periodic)} flags for a {ndim}-d grid")
    return periodic


def parse_boundary(flags: str) -> tuple[bool, ...]:
    """``"PO"`` -> ``(True, False)``: P = periodic, O = open."""
    out = []
    for ch in flags.upper():
        if ch not in "PO":
            raise ValueError(f"boundary flag must be P or O, got {ch!r}")
        out.append(ch == "P")
    return tuple(out)


def format_boundary(periodic: Sequence[bool]) -> str:
    return "".join("P" if p else "O" for p in periodic)


@dataclass(frozen=True, eq=False)
class Grid:
    """Dense lattice of cell states (uint8 codes 0/1/2, row-major).

    ``periodic[j]`` selects torus wrapping along axis ``j``; reads past the
    edge of an open axis see state A.
    """

    cells: np.ndarray
    periodic: tuple[bool, ...] = field(default=None)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.uint8, copy=True)
        if cells.ndim < 1 or cells.size == 0:
            raise ValueError("grid needs at least one axis and one cell")
        if cells.max(initial=0) > 2:
            raise ValueError("cell codes must be 0, 1 or 2")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "periodic", _as_periodic(self.periodic, cells.ndim))

    @classmethod
    def blank(cls, dims: Sequence[int], periodic=None) -> "Grid":
        return cls(np.zeros(tuple(dims), dtype=np.uint8), periodic)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.cells.shape

    @property
    def ndim(self) -> int:
        return self.cells.ndim

    @property
    def size(self) -> int:
        return self.cells.size

    def with_cells(self, cells: np.ndarray) -> "Grid":
        return Grid(cells, self.periodic)

    def __getitem__(self, coord) -> CellState:
        """Boundary-aware read; open-axis reads outside the box give A."""
        coord = tuple(int(c) for c in coord)
        if len(coord) != self.ndim:
            raise IndexError("coordinate rank does not match grid")
        idx = []
        for c, n, per in zip(coord, self.dims, self.periodic):
            if per:
                c %= n
            elif not 0 <= c < n:
                return CellState.A
            idx.append(c)
        return CellState(int(self.cells[tuple(idx)]))

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.periodic == other.periodic
                and self.dims == other.dims
                and bool(np.array_equal(self.cells, other.cells)))

    def __hash__(self):
        return hash((self.dims, self.periodic, self.cells.tobytes()))

    def __repr__(self):
        dims = "x".join(map(str, self.dims))
        return f"Grid({dims}, {format_boundary(self.periodic)}, counts={count_states(self)})"

    def to_text(self) -> str:
        dims = "x".join(map(str, self.dims))
        header = f"DCS1 {self.ndim} {dims} {format_boundary(self.periodic)}"
        return header + "\n" + _block_to_text(_CHARS[self.cells]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Grid":
        lines = text.splitlines()
        if not lines:
            raise GridFormatError("line 1: empty grid file")
        head = lines[0].split()
        if len(head) != 4 or head[0] != "DCS1":
            raise GridFormatError("line 1: expected 'DCS1 <d> <e1>x<e2>... <flags>'")
        try:
            d = int(head[1])
            dims = tuple(int(e) for e in head[2].split("x"))
            periodic = parse_boundary(head[3])
        except ValueError as exc:
            raise GridFormatError(f"line 1: {exc}") from None
        if len(dims) != d or len(periodic) != d or min(dims) < 1:
            raise GridFormatError("line 1: dimension, extents and flags disagree")
        codes = _text_to_block(lines[1:], dims, "ABC", GridFormatError, first_line=2)
        return cls(_CODES[codes], periodic)


def _block_to_text(chars: np.ndarray) -> str:
    """Rows along the last axis; blank line between top-level slices for d >= 3."""
    if chars.ndim == 1:
        return chars.tobytes().decode()
    if chars.ndim == 2:
        return "\n".join(row.tobytes().decode() for row in chars)
    return "\n\n".join(_block_to_text(sl) for sl in chars)


def _text_to_block(lines, dims, alphabet, err, first_line):
    rows = []
    for lineno, line in enumerate(lines, start=first_line):
        line = line.strip()
        if not line:
            continue
        if len(line) != dims[-1]:
            raise err(f"line {lineno}: expected {dims[-1]} characters, got {len(line)}")
        for pos, ch in enumerate(line, start=1):
            if ch not in alphabet:
                raise err(f"line {lineno}, position {pos}: unexpected character {ch!r}")
        rows.append(np.frombuffer(line.encode(), dtype=np.uint8))
    want = int(np.prod(dims[:-1])) if len(dims) > 1 else 1
    if len(rows) != want:
        raise err(f"line {first_line}: expected {want} rows, found {len(rows)}")
    return np.stack(rows).reshape(dims)


# --------------------------------------------------------------------- masks

@lru_cache(maxsize=None)
def cube_symmetries(d: int) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
    """All ``d! * 2**d`` elements of the hyperoctahedral group as (perm, signs)."""
    return tuple(
        (perm, signs)
        for perm in itertools.permutations(range(d))
        for signs in itertools.product((1, -1), repeat=d)
    )


def apply_symmetry(offset: Sequence[int], perm, signs) -> tuple[int, ...]:
    return tuple(signs[i] * offset[perm[i]] for i in range(len(offset)))


@dataclass(frozen=True)
class Mask:
    dim: int
    offsets: tuple[tuple[int, ...], ...]
    includes_center: bool
    rank: int
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.offsets:
            raise ValueError("mask must contain at least one offset")
        if any(len(o) != self.dim for o in self.offsets):
            raise ValueError("offset length does not match mask dimension")
        if self.includes_center != ((0,) * self.dim in self.offsets):
            raise ValueError("includes_center disagrees with offsets")
        if self.rank != _rank(self.offsets):
            raise ValueError(f"stored rank {self.rank} != computed rank {_rank(self.offsets)}")

    @classmethod
    def from_offsets(cls, offsets: Iterable[Sequence[int]], name: str = "") -> "Mask":
        offs = tuple(sorted({tuple(int(c) for c in o) for o in offsets}))
        if not offs:
            raise ValueError("mask must contain at least one offset")
        dim = len(offs[0])
        return cls(dim, offs, (0,) * dim in offs, _rank(offs), name)

    def __len__(self):
        return len(self.offsets)

    def as_array(self) -> np.ndarray:
        return np.array(self.offsets, dtype=np.int64).reshape(len(self.offsets), self.dim)

    def to_block(self) -> np.ndarray:
        side = 2 * self.rank + 1
        block = np.zeros((side,) * self.dim, dtype=np.uint8)
        for o in self.offsets:
            block[tuple(c + self.rank for c in o)] = 1
        return block

    def to_text(self) -> str:
        block = np.where(self.to_block() == 1, ord("1"), ord("0")).astype(np.uint8)
        return f"DIM {self.dim}\nRANK {self.rank}\n{_block_to_text(block)}\n"


def _rank(offsets) -> int:
    return max(max(abs(c) for c in o) for o in offsets) if offsets else 0


@dataclass(frozen=True)
class SymmetryViolation:
    offset: tuple[int, ...]
    image: tuple[int, ...]
    perm: tuple[int, ...]
    signs: tuple[int, ...]

    def __str__(self):
        return (f"offset {self.offset} maps to {self.image} under "
                f"perm={self.perm} signs={self.signs}, which is not in the mask")


def validate_mask_symmetry(mask: Mask) -> SymmetryViolation | None:
    """Return ``None`` when the offsets are invariant under the full d-cube group."""
    members = set(mask.offsets)
    for perm, signs in cube_symmetries(mask.dim):
        for o in mask.offsets:
            img = apply_symmetry(o, perm, signs)
            if img not in members:
                return SymmetryViolation(o, img, perm, signs)
    return None


def parse_mask(text: str, name: str = "") -> Mask:
    lines = text.splitlines()

    def header(i, key):
        if i >= len(lines):
            raise MaskFormatError(f"line {i + 1}: missing '{key} <n>' header")
        parts = lines[i].split()
        if len(parts) != 2 or parts[0].upper() != key:
            raise MaskFormatError(f"line {i + 1}: expected '{key} <n>'")
        try:
            value = int(parts[1])
        except ValueError:
            raise MaskFormatError(f"line {i + 1}: {key} must be an integer") from None
        return value

    d = header(0, "DIM")
    r = header(1, "RANK")
    if d < 1 or r < 0:
        raise MaskFormatError("line 1: DIM must be >= 1 and RANK >= 0")
    side = 2 * r + 1
    block = _text_to_block(lines[2:], (side,) * d, "01", MaskFormatError, first_line=3)
    offsets = [tuple(int(c) - r for c in idx) for idx in zip(*np.nonzero(block == ord("1")))]
    if not offsets:
        raise MaskFormatError("line 3: mask is empty")
    if _rank(offsets) != r:
        raise MaskFormatError(f"line 2: RANK {r} but the outermost '1' is at rank {_rank(offsets)}")
    mask = Mask.from_offsets(offsets, name=name)
    violation = validate_mask_symmetry(mask)
    if violation is not None:
        pos = tuple(c + r for c in violation.image)
        raise MaskFormatError(f"block position {pos}: symmetry violation, {violation}")
    return mask


def load_mask(path: str | Path) -> Mask:
    path = Path(path)
    return parse_mask(path.read_text(), name=path.stem)


def bundled_masks() -> list[str]:
    pkg = resources.files("dcsoliton") / "masks"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".mask"))


def bundled_mask(name: str) -> Mask:
    res = resources.files("dcsoliton") / "masks" / f"{name}.mask"
    return parse_mask(res.read_text(), name=name)


def resolve_mask(ref: str | Path) -> Mask:
    """A path to a mask file, or the name of a bundled mask."""
    p = Path(ref)
    if p.exists():
        return load_mask(p)
    if str(ref) in bundled_masks():
        return bundled_mask(str(ref))
    raise FileNotFoundError(f"no mask file or bundled mask named {ref!r}")


@dataclass(frozen=True)
class ParityBalance:
    even_count: int
    odd_count: int

    @property
    def warn(self) -> bool:
        # single-colour masks on the chessboard never return
        return self.even_count == 0 or self.odd_count == 0


def mask_parity_balance(mask: Mask) -> ParityBalance:
    odd = sum(sum(o) % 2 for o in mask.offsets)
    return ParityBalance(len(mask.offsets) - odd, odd)


# ------------------------------------------------------------ grid helpers

_TRANSLIT = np.array([0, 2, 1], dtype=np.uint8)


def transliterate(grid: Grid) -> Grid:
    """Swap B and C everywhere; A is fixed."""
    return grid.with_cells(_TRANSLIT[grid.cells])


def count_states(grid: Grid) -> tuple[int, int, int]:
    counts = np.bincount(grid.cells.ravel(), minlength=3)
    return int(counts[0]), int(counts[1]), int(counts[2])


def random_initial(dims: Sequence[int], n_points: int, seed: int, periodic=None) -> Grid:
    """All-A lattice with ``n_points`` distinct B cells.

    Each point draws one SplitMix64 value per axis (in axis order) reduced
    modulo the extent; a coordinate already taken is redrawn.
    """
    dims = tuple(int(e) for e in dims)
    total = int(np.prod(dims))
    if n_points < 0:
        raise ValueError("n_points must be non-negative")
    if n_points > total:
        raise ValueError(f"{n_points} points do not fit in {total} cells")
    rng = SplitMix64(seed)
    cells = np.zeros(dims, dtype=np.uint8)
    placed = 0
    while placed < n_points:
        coord = tuple(rng.below(n) for n in dims)
        if cells[coord]:
            continue
        cells[coord] = CellState.B
        placed += 1
    return Grid(cells, periodic)


def neighbor(arr: np.ndarray, offset: Sequence[int], periodic: Sequence[bool], fill=0,
             axes_from: int = 0) -> np.ndarray:
    """``out[v] = arr[v + offset]`` over the trailing lattice axes.

    Periodic axes wrap; open axes read ``fill`` past the edge.  Leading
    ``axes_from`` axes (e.g. a time axis) are left alone.
    """
    out = arr
    for j, (o, per) in enumerate(zip(offset, periodic)):
        if o == 0:
            continue
        ax = axes_from + j
        if per:
            out = np.roll(out, -o, axis=ax)
            continue
        n = arr.shape[ax]
        shifted = np.full_like(out, fill)
        if abs(o) < n:
            src = [slice(None)] * out.ndim
            dst = [slice(None)] * out.ndim
            if o > 0:
                src[ax], dst[ax] = slice(o, None), slice(0, n - o)
            else:
                src[ax], dst[ax] = slice(0, n + o), slice(-o, None)
            shifted[tuple(dst)] = out[tuple(src)]
        out = shifted
    return out
