import itertools

import numpy as np
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from dcsoliton import bundled_mask
from dcsoliton.filters import AFilterField, Pattern
from dcsoliton.structures import (
    NULL_PERIOD, NullRiverSighting, detect_local_reversals, detect_nullrivers, has_superriver,
    label_components, label_river_components, minimal_period, nullriver_signature_scan, nullrivers_in_frames,
)

from conftest import returned_run


def river_field(mask):
    mask = np.asarray(mask, dtype=bool)
    values = np.where(mask, 2, 6).astype(np.int8)
    pattern = np.where(mask, Pattern.RIVER, Pattern.OTHER).astype(np.uint8)
    return AFilterField(values, pattern)


def test_no_rivers():
    assert label_river_components(river_field(np.zeros((6, 6))), (True, True)) == []


def test_full_row_wraps():
    m = np.zeros((6, 7), dtype=bool)
    m[2] = True
    comps = label_river_components(river_field(m), (True, True))
    assert len(comps) == 1 and comps[0].wraps == (False, True) and comps[0].size == 7
    assert has_superriver(river_field(m), (True, True))


def test_full_column_wraps_axis0():
    m = np.zeros((6, 7), dtype=bool)
    m[:, 3] = True
    assert label_river_components(river_field(m), (True, True))[0].wraps == (True, False)


def test_closed_loop_does_not_wrap():
    m = np.zeros((8, 8), dtype=bool)
    m[2, 2:6] = m[5, 2:6] = m[2:6, 2] = m[2:6, 5] = True
    comps = label_river_components(river_field(m), (True, True))
    assert len(comps) == 1 and comps[0].wraps == (False, False)


def test_diagonal_band_wraps_both():
    m = np.eye(6, dtype=bool)
    comps = label_components(m, (True, True))
    assert len(comps) == 1 and comps[0].wraps == (True, True)


def test_open_axis_never_wraps():
    m = np.zeros((6, 7), dtype=bool)
    m[2] = True
    assert label_components(m, (True, False))[0].wraps == (False, False)


def cover_oracle(mask):
    """Wrap flags from connectivity in a 5x5 tiling of the torus (universal-cover unrolling)."""
    n0, n1 = mask.shape
    reps = 5
    labels, _ = ndimage.label(np.tile(mask, (reps, reps)), structure=np.ones((3, 3)))
    c = reps // 2
    out = {}
    for v in zip(*np.nonzero(mask)):
        here = labels[v[0] + c * n0, v[1] + c * n1]
        wraps = [False, False]
        for k0, k1 in itertools.product(range(-2, 3), repeat=2):
            if (k0 or k1) and labels[v[0] + (c + k0) * n0, v[1] + (c + k1) * n1] == here:
                wraps[0] |= k0 != 0
                wraps[1] |= k1 != 0
        out[tuple(map(int, v))] = tuple(wraps)
    return out


@given(st.integers(3, 6), st.integers(3, 6), st.data())
@settings(max_examples=150, deadline=None)
def test_winding_matches_cover_oracle(n0, n1, data):
    bits = data.draw(st.lists(st.booleans(), min_size=n0 * n1, max_size=n0 * n1))
    mask = np.array(bits).reshape(n0, n1)
    comps = label_components(mask, (True, True))
    oracle = cover_oracle(mask)
    assert sum(c.size for c in comps) == mask.sum()
    for comp in comps:
        for v in comp.members:
            assert oracle[tuple(v)] == comp.wraps


def test_components_use_moore_adjacency():
    m = np.zeros((6, 6), dtype=bool)
    m[1, 1] = m[2, 2] = True
    assert len(label_components(m, (True, True))) == 1


def test_3d_components():
    m = np.zeros((4, 4, 4), dtype=bool)
    m[1, 1, :] = True
    comps = label_components(m, (True, True, True))
    assert len(comps) == 1 and comps[0].wraps == (False, False, True)


# ------------------------------------------------------------------ NullRivers

BANK = [2, 1, 2, 1, 0, 0]


def bank_frames(shape, null_cell=None, null_word=None):
    """12 frames of a Bank region (each cell cycles CBCBAA with a random phase)."""
    rng = np.random.default_rng(0)
    phases = rng.integers(0, 6, size=shape)
    frames = np.empty((NULL_PERIOD, *shape), dtype=np.uint8)
    for k in range(NULL_PERIOD):
        frames[k] = np.take(BANK, (phases + k) % 6)
    if null_cell is not None:
        frames[(slice(None),) + null_cell] = null_word
    return frames


def test_uniform_bank_has_no_sightings():
    assert nullrivers_in_frames(bank_frames((9, 9)), (True, True), 0, [(0, 1)], 1) == []


def test_synthetic_nullriver():
    w12 = [2, 1, 2, 1, 0, 0, 1, 2, 1, 2, 0, 0]  # Bank word, then its transliteration
    frames = bank_frames((9, 9), (4, 4), w12)
    found = nullrivers_in_frames(frames, (True, True), 24, bundled_mask("2d-r1-moore").offsets, 1)
    assert [s.cell for s in found] == [(4, 4)]
    s = found[0]
    assert s.states == tuple(w12) and s.phase == 0
    assert s.outline.shape == (12, 4) and s.footprint_outline.shape == (12, 8, 4)


def test_nullriver_needs_quiet_neighbourhood():
    w12 = [2, 1, 2, 1, 0, 0, 1, 2, 1, 2, 0, 0]
    frames = bank_frames((9, 9), (4, 4), w12)
    frames[:, 4, 6] = w12  # second one at distance 2
    assert len(nullrivers_in_frames(frames, (True, True), 0, [(0, 1)], 1)) == 2
    assert nullrivers_in_frames(frames, (True, True), 0, [(0, 1)], 2) == []


def test_minimal_period():
    frames = np.array([0, 1] * 6, dtype=np.uint8).reshape(12, 1)
    assert minimal_period(frames)[0] == 2
    frames = np.array([0] * 11 + [1], dtype=np.uint8).reshape(12, 1)
    assert minimal_period(frames)[0] == 12


def test_recorded_run_sighting():
    traj = returned_run("2d-r2-balanced", (30, 30), 8, 1)
    found = detect_nullrivers(traj, 42, radius=1)
    assert (1, 19) in [s.cell for s in found]
    for s in found:
        frames = np.stack([c for _, c in traj.iter_cells(37, 48)])
        word = frames[(slice(None),) + s.cell]
        assert all(not np.array_equal(word, np.roll(word, p)) for p in (1, 2, 3, 4, 6))
        assert tuple(int(x) for x in word) == s.states


def test_signature_scan_empty():
    st_ = nullriver_signature_scan([])
    assert st_.n_sightings == 0 and st_.regular == 0 and st_.irregular == 0
    assert st_.to_csv().splitlines()[0] == "phase,outline,count"


def sighting_with_outline(rows):
    outline = np.zeros((12, 4), dtype=np.int8)
    for k, faces in rows.items():
        outline[k - 1] = faces
    return NullRiverSighting((0, 0), 0, outline, outline[:, None, :], (0,) * 12)


def test_signature_regular_and_closed():
    s = sighting_with_outline({2: [-1, -1, 0, 0], 9: [0, 0, -1, -1], 12: [1, 1, 0, 0], 5: [0, 0, 1, 1]})
    st_ = nullriver_signature_scan([s])
    assert (st_.regular, st_.closed, st_.diagonal_counterexamples) == (1, 1, 0)
    assert st_.aligned_phase == [0]


def test_signature_diagonal_counterexample():
    s = sighting_with_outline({2: [-1, 0, -1, 0], 9: [0, -1, 0, -1], 12: [1, 0, 1, 0], 5: [0, 1, 0, 1]})
    st_ = nullriver_signature_scan([s])
    assert st_.diagonal_counterexamples == 1


def test_signature_shifted_alignment():
    rows = {2: [-1, -1, 0, 0], 9: [0, 0, -1, -1], 12: [1, 1, 0, 0], 5: [0, 0, 1, 1]}
    s = sighting_with_outline({(k + 2) % 12 + 1: v for k, v in rows.items()})
    assert nullriver_signature_scan([s]).aligned_phase == [3]


def test_signature_irregular():
    s = sighting_with_outline({2: [1, 0, 0, 0]})
    assert nullriver_signature_scan([s]).irregular == 1


# ------------------------------------------------------------ local reversals

def test_monotone_series():
    events = detect_local_reversals(list(range(20, -1, -1)))
    assert [(e.t, e.nc_value) for e in events] == [(20, 0)]
    assert detect_local_reversals(list(range(10, 40))) == []


def test_dip_event():
    nc = [50] * 5000 + [1] + [50] * 200
    nc[4990:5000] = range(60, 50, -1)
    events = detect_local_reversals(nc)
    assert [(e.t, e.nc_value, e.phase) for e in events] == [(5000, 1, 5000 % 3)]


def test_event_values_match_series():
    rng = np.random.default_rng(2)
    nc = rng.integers(0, 30, size=2000)
    nc[-1] = 0
    for e in detect_local_reversals(nc, theta=5, window=20):
        assert nc[e.t] == e.nc_value <= 5
        assert e.nc_value == nc[max(0, e.t - 20):e.t + 21].min()


def test_returned_run_ends_with_zero_event(small_run):
    nc = small_run.outcome.nc_series
    events = detect_local_reversals(nc[1:], t_offset=1)
    assert events[-1].t == small_run.t_half and events[-1].nc_value == 0
    assert all(e.t >= 1 for e in events)
