"""Word-parallel stepping on packed state planes.

A lattice of shape ``dims`` is stored as two planes (B and C) of shape
``(rows, words)``: ``rows = prod(dims[:-1])`` and the last axis is packed
little-endian into 64-bit words.  Neighbour lookups along the leading axes
are row remaps; along the last axis they are multiword bit shifts.
"""

from __future__ import annotations

import numba as nb
import numpy as np

U64 = np.uint64
ONE = np.uint64(1)
ZERO = np.uint64(0)


def pack(bits: np.ndarray) -> np.ndarray:
    """bool array of shape dims -> (rows, words) uint64."""
    width = bits.shape[-1]
    rows = bits.reshape(-1, width)
    nw = (width + 63) // 64
    padded = np.zeros((rows.shape[0], nw * 64), dtype=np.uint8)
    padded[:, :width] = rows
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def unpack(plane: np.ndarray, dims) -> np.ndarray:
    width = dims[-1]
    raw = np.ascontiguousarray(plane).view(np.uint8)
    bits = np.unpackbits(raw, axis=1, bitorder="little")[:, :width]
    return bits.reshape(dims).astype(bool)


def tail_mask(width: int) -> np.ndarray:
    nw = (width + 63) // 64
    out = np.full(nw, np.iinfo(np.uint64).max, dtype=np.uint64)
    rem = width - 64 * (nw - 1)
    if rem < 64:
        out[-1] = np.uint64((1 << rem) - 1)
    return out


@nb.njit(cache=True, inline="always")
def _shr_into(src, s, out):
    # out bit x |= src bit (x + s)
    nw = src.shape[0]
    q = s // 64
    b = np.uint64(s % 64)
    for w in range(nw):
        i = w + q
        if i >= nw:
            break
        v = src[i] >> b
        if b != 0 and i + 1 < nw:
            v |= src[i + 1] << (np.uint64(64) - b)
        out[w] |= v


@nb.njit(cache=True, inline="always")
def _shl_into(src, s, out):
    # out bit x |= src bit (x - s)
    nw = src.shape[0]
    q = s // 64
    b = np.uint64(s % 64)
    for w in range(nw - 1, -1, -1):
        i = w - q
        if i < 0:
            break
        v = src[i] << b
        if b != 0 and i - 1 >= 0:
            v |= src[i - 1] >> (np.uint64(64) - b)
        out[w] |= v


@nb.njit(cache=True)
def shift_rows(plane, dx, width, periodic, tail, out):
    """out[r, x] = plane[r, x + dx] with torus wrap or zero fill."""
    rows, nw = plane.shape
    out[:, :] = 0
    if periodic:
        s = dx % width
        for r in range(rows):
            if s == 0:
                for w in range(nw):
                    out[r, w] = plane[r, w]
            else:
                _shr_into(plane[r], s, out[r])
                _shl_into(plane[r], width - s, out[r])
    else:
        if dx >= width or -dx >= width:
            return
        for r in range(rows):
            if dx >= 0:
                _shr_into(plane[r], dx, out[r])
            else:
                _shl_into(plane[r], -dx, out[r])
    for r in range(rows):
        for w in range(nw):
            out[r, w] &= tail[w]


@nb.njit(cache=True)
def presence(cplane, row_maps, dx_index, dx_values, width, periodic, tail, shifted, out):
    """OR of the C plane over all mask offsets."""
    rows, nw = cplane.shape
    for k in range(dx_values.shape[0]):
        shift_rows(cplane, dx_values[k], width, periodic, tail, shifted[k])
    out[:, :] = 0
    for m in range(row_maps.shape[0]):
        src = shifted[dx_index[m]]
        rmap = row_maps[m]
        for r in range(rows):
            s = rmap[r]
            if s >= 0:
                for w in range(nw):
                    out[r, w] |= src[s, w]


@nb.njit(cache=True)
def _apply_laws(bplane, cplane, pplane, tail, nb_out, nc_out):
    # C -> B under both laws; law I: B -> C; law II: A -> C
    rows, nw = bplane.shape
    for r in range(rows):
        for w in range(nw):
            bb = bplane[r, w]
            cc = cplane[r, w]
            pp = pplane[r, w]
            nb_out[r, w] = cc
            nc_out[r, w] = ((bb & ~pp) | (pp & ~(bb | cc))) & tail[w]


@nb.njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@nb.njit(cache=True)
def popcount_plane(plane):
    total = 0
    rows, nw = plane.shape
    for r in range(rows):
        for w in range(nw):
            total += np.int64(_popcount(plane[r, w]))
    return total


@nb.njit(cache=True)
def step(bplane, cplane, row_maps, dx_index, dx_values, width, periodic, tail,
         shifted, pplane, nb_out, nc_out):
    presence(cplane, row_maps, dx_index, dx_values, width, periodic, tail, shifted, pplane)
    _apply_laws(bplane, cplane, pplane, tail, nb_out, nc_out)


@nb.njit(cache=True)
def evolve(bplane, cplane, n_steps, row_maps, dx_index, dx_values, width, periodic,
           tail, stop_at_mirror, nc_series):
    """Advance ``n_steps`` in place; optionally stop at the first N_C == 0.

    ``nc_series[t]`` receives N_C after step t (index 0 is left untouched).
    Returns the number of steps taken.
    """
    rows, nw = bplane.shape
    shifted = np.zeros((dx_values.shape[0], rows, nw), dtype=np.uint64)
    pplane = np.zeros((rows, nw), dtype=np.uint64)
    b2 = np.zeros((rows, nw), dtype=np.uint64)
    c2 = np.zeros((rows, nw), dtype=np.uint64)
    record = nc_series.shape[0] > 0
    for t in range(1, n_steps + 1):
        step(bplane, cplane, row_maps, dx_index, dx_values, width, periodic, tail,
             shifted, pplane, b2, c2)
        bplane[:, :] = b2
        cplane[:, :] = c2
        if record or stop_at_mirror:
            nc = popcount_plane(cplane)
            if record:
                nc_series[t] = nc
            if stop_at_mirror and nc == 0:
                return t
    return n_steps
