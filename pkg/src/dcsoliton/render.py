"""PPM rendering of lattice states and filter overlays.

Images are ``(H, W, 3)`` uint8 arrays.  1D lattices render as a single row,
3D lattices as one sheet per slice along axis 0.  Filter overlays draw in
three layers: A-filter fill, then B-filter face strokes, then C-filter
crosses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .filters import AFilterField, BFilterField, CFilterField, FrameWindow, Pattern, a_filter, b_filter, c_filter
from .lattice import Grid

RGB = tuple[int, int, int]

WHITE: RGB = (255, 255, 255)
BLACK: RGB = (0, 0, 0)


def _default_a_colors() -> dict[str, RGB]:
    return {
        "0": (255, 220, 0),      # yellow
        "1": (40, 90, 230),      # blue
        "2-bank": (150, 150, 150),
        "2-river": (0, 170, 60),
        "2-other": (120, 90, 40),
        "3": (220, 30, 30),
        "4": (140, 40, 170),
        "5": (0, 190, 200),
        "6": (245, 245, 235),
    }


@dataclass(frozen=True)
class Palette:
    states: tuple[RGB, RGB, RGB] = (WHITE, (0, 0, 255), (255, 0, 0))
    a_filter: dict[str, RGB] = field(default_factory=_default_a_colors)
    boundary_pos: RGB = BLACK
    boundary_neg: RGB = WHITE
    cross: RGB = BLACK
    bank_alpha: float = 0.25  # bank opacity when drawn transparent

    def a_table(self, transparent_bank: bool = False) -> np.ndarray:
        """Colour lookup indexed by ``value * 3 + pattern``."""
        table = np.zeros((7 * 3, 3), dtype=np.uint8)
        for v in range(7):
            for p in Pattern:
                key = str(v)
                if v == 2:
                    key = {Pattern.BANK: "2-bank", Pattern.RIVER: "2-river", Pattern.OTHER: "2-other"}[p]
                table[v * 3 + p] = self.a_filter[key]
        if transparent_bank:
            bank = np.array(self.a_filter["2-bank"], dtype=float)
            blend = self.bank_alpha * bank + (1 - self.bank_alpha) * np.array(WHITE, dtype=float)
            table[2 * 3 + Pattern.BANK] = np.round(blend).astype(np.uint8)
        return table


DEFAULT_PALETTE = Palette()


def _as_2d(arr: np.ndarray) -> np.ndarray:
    return arr.reshape(1, -1) if arr.ndim == 1 else arr


def _upscale(img: np.ndarray, scale: int) -> np.ndarray:
    if scale < 1:
        raise ValueError("scale must be >= 1")
    return np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)


def _sheets(arr: np.ndarray) -> list[np.ndarray]:
    if arr.ndim <= 2:
        return [_as_2d(arr)]
    if arr.ndim == 3:
        return [arr[z] for z in range(arr.shape[0])]
    raise ValueError("rendering supports 1 to 3 dimensions")


def render_cells(cells: np.ndarray, palette: Palette = DEFAULT_PALETTE, scale: int = 1) -> list[np.ndarray]:
    colors = np.array(palette.states, dtype=np.uint8)
    return [_upscale(colors[s], scale) for s in _sheets(cells)]


def render_state(grid: Grid, palette: Palette = DEFAULT_PALETTE, scale: int = 1) -> list[np.ndarray]:
    """One image for 1D/2D lattices, one per axis-0 slice for 3D."""
    return render_cells(np.asarray(grid.cells), palette, scale)


def _stroke_faces(img: np.ndarray, values: np.ndarray, axis: int, scale: int, palette: Palette):
    """Draw the face between v and v+e_axis on the far edge of cell v."""
    for (r, c), v in np.ndenumerate(values):
        if v == 0:
            continue
        color = palette.boundary_pos if v > 0 else palette.boundary_neg
        if axis == 1:
            img[r * scale:(r + 1) * scale, (c + 1) * scale - 1] = color
        else:
            img[(r + 1) * scale - 1, c * scale:(c + 1) * scale] = color


def _draw_crosses(img: np.ndarray, marks: np.ndarray, scale: int, color: RGB):
    arm = scale // 4
    mid = scale // 2
    for r, c in zip(*np.nonzero(marks)):
        y, x = r * scale + mid, c * scale + mid
        for k in range(-arm, arm + 1):
            img[y + k, x + k] = color
            img[y + k, x - k] = color


def render_filters(window: FrameWindow, a: bool = True, b: Sequence[int] = (), c: Sequence[int] = (),
                   palette: Palette = DEFAULT_PALETTE, scale: int = 5,
                   transparent_bank: bool = False) -> list[np.ndarray]:
    """Overlay the requested filters for the gap centred in ``window``.

    ``b`` and ``c`` list filter indices i in {0, 1, 2}.  Without ``a`` the
    fill is white.  In 3D only the in-slice faces (axes 1 and 2) are stroked.
    """
    frames = window.frames
    ndim = frames.ndim - 1
    shape = frames.shape[1:]
    if a:
        af: AFilterField = a_filter(window)
        table = palette.a_table(transparent_bank)
        base = table[af.values.astype(np.int64) * 3 + af.pattern_class]
    else:
        base = np.broadcast_to(np.array(WHITE, dtype=np.uint8), (*shape, 3))
    if ndim == 1:
        base = base.reshape(1, shape[0], 3)
    sheets = [base] if ndim <= 2 else [base[z] for z in range(shape[0])]
    images = [_upscale(s, scale).copy() for s in sheets]

    in_plane = {1: [(0, 1)], 2: [(0, 0), (1, 1)], 3: [(1, 0), (2, 1)]}[ndim]
    for i in b:
        for axis, img_axis in in_plane:
            field_: BFilterField = b_filter(window, i, axis)
            vals = field_.values
            if ndim == 1:
                vals = vals.reshape(1, -1)
            for z, img in enumerate(images):
                _stroke_faces(img, vals[z] if ndim == 3 else vals, img_axis, scale, palette)
    for i in c:
        cf: CFilterField = c_filter(window, i)
        marks = _as_2d(cf.values) if ndim <= 2 else cf.values
        for z, img in enumerate(images):
            _draw_crosses(img, marks[z] if ndim == 3 else marks, scale, palette.cross)
    return images


def ppm_bytes(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


_PPM_HEADER = re.compile(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s")


def read_ppm(data: bytes) -> np.ndarray:
    m = _PPM_HEADER.match(data)
    if not m or int(m.group(3)) != 255:
        raise ValueError("only binary 8-bit PPM (P6) is supported")
    w, h = int(m.group(1)), int(m.group(2))
    body = data[m.end():m.end() + w * h * 3]
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)


def write_images(images: list[np.ndarray], out: str | Path) -> list[Path]:
    """Write one file, or ``stem_zNN.ppm`` sheets when there are several."""
    out = Path(out)
    if len(images) == 1:
        out.write_bytes(ppm_bytes(images[0]))
        return [out]
    paths = []
    for z, img in enumerate(images):
        p = out.with_name(f"{out.stem}_z{z:02d}{out.suffix or '.ppm'}")
        p.write_bytes(ppm_bytes(img))
        paths.append(p)
    return paths
