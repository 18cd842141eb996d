import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcsoliton import Grid, Trajectory, bundled_mask, run_to_mirror
from dcsoliton.analysis import (
    MedianSeries, NotReturnedError, accumulate_F, fit_symmetry, global_a_counts, integral_series,
    integral_terms, main_integral, mcl_lambda, median_series, phase_series, series_csv,
)
from dcsoliton.filters import a_filter, frame_window
from dcsoliton.lattice import count_states, random_initial
from dcsoliton.reference import reference_run


def test_phase_series_example():
    ps = phase_series([0, 5, 7, 1, 6, 8])
    assert [list(ps[p]) for p in range(3)] == [[0, 1], [5, 6], [7, 8]]


def test_phase_series_constant():
    ps = phase_series([4] * 9)
    assert all(list(ps[p]) == [4, 4, 4] for p in range(3))


def test_median_picks_middle():
    m = median_series([10, 20, 30])
    assert list(m.t) == [2] and m.values[0] == 20 and m.phase_id[0] == 1


def test_median_tie_keeps_previous_residue():
    m = median_series([10, 20, 30, 20, 20, 30], per_block=False)
    # t=2: median 20 at residue 1; t=3: trio (20,30,20) ties residues 0,1 -> keep 1
    assert list(m.phase_id[:2]) == [1, 1]


def test_median_tie_smallest_residue_otherwise():
    m = median_series([5, 5, 9])
    assert m.phase_id[0] == 0


def test_median_per_block_stamps():
    m = median_series(list(range(11)))
    assert list(m.t) == [2, 5, 8]
    assert list(m.values) == [1, 4, 7]


def test_median_mean_option():
    m = median_series([1, 2, 6], use_mean=True)
    assert m.values[0] == pytest.approx(3.0) and m.phase_id[0] == 1


def test_median_flips():
    m = MedianSeries(np.array([2, 5, 8, 11]), np.zeros(4), np.array([0, 0, 2, 2]))
    assert list(m.flips()) == [8]


def nc_through_full_period(traj):
    return np.array([count_states(Grid(c))[2] for _, c in traj.iter_cells(0, 2 * traj.t_half)])


def test_phase_reflection_after_mirror(small_run):
    tau = small_run.t_half
    nc = nc_through_full_period(small_run)
    for k in range(tau + 1):
        assert nc[tau + k] == nc[tau - k]
    # the residue of tau maps onto itself; the other two trade places
    r = tau % 3
    after = phase_series(nc[tau:])
    before = phase_series(nc[tau::-1])
    for p in range(3):
        # values on residue (tau + p) retrace residue (tau - p) backwards
        np.testing.assert_array_equal(after[p], before[p])
        same_residue = (tau + p) % 3 == (tau - p) % 3
        assert same_residue == (p == 0) and ((tau + p) % 3 == r) == (p == 0)


def mcl_oracle(traj):
    """Per-cell sum = 3 * (A count over one full period) - period/2 * 2, from naive stepping."""
    tau = traj.t_half
    frames = reference_run(traj.start, traj.mask, 2 * tau - 1)
    a_count = sum((f.cells == 0).astype(np.int64) for f in frames)
    return 3 * a_count - 2 * tau


def test_mcl_matches_oracle(small_run):
    res = mcl_lambda(small_run)
    np.testing.assert_array_equal(res.per_cell_sums, mcl_oracle(small_run))
    assert res.all_equal and res.divisible_by_4
    assert res.lam == res.per_cell_sums.flat[0] // 4 == res.lambda_


def test_mcl_integral_cross_check(small_run):
    res = mcl_lambda(small_run)
    S = main_integral(small_run, 0, small_run.t_half)
    assert S == res.per_cell_sums.sum() == 4 * res.lam * small_run.start.size


def test_mcl_all_a_run():
    mask = bundled_mask("2d-r1-moore")
    start = Grid.blank((6, 6))
    traj = Trajectory(start, mask, run_to_mirror(start, mask))
    res = mcl_lambda(traj)
    # period 2, every frame all A: 3 * 2 - 2 = 4 per cell
    np.testing.assert_array_equal(res.per_cell_sums, mcl_oracle(traj))
    assert res.lam == 1


def test_mcl_requires_closed_run():
    mask = bundled_mask("2d-r1-moore")
    start = random_initial((30, 30), 8, 0)
    traj = Trajectory(start, mask, run_to_mirror(start, mask, 10))
    with pytest.raises(NotReturnedError, match="MCL requires a closed run"):
        mcl_lambda(traj)


def test_mcl_open_boundary():
    mask = bundled_mask("2d-r1-moore")
    for seed in range(6):
        start = random_initial((10, 10), 4, seed, "PO")
        traj = Trajectory(start, mask, run_to_mirror(start, mask, 20_000))
        if traj.t_half is None:
            continue
        res = mcl_lambda(traj)
        np.testing.assert_array_equal(res.per_cell_sums, mcl_oracle(traj))
        assert res.all_equal and res.divisible_by_4


def test_accumulate_F(small_run):
    tr0 = accumulate_F(small_run, 0)
    af0 = a_filter(frame_window(small_run, 0)).values.astype(np.int64)
    np.testing.assert_array_equal(2 * tr0.F, af0 - 2)
    tau = small_run.t_half
    tr = accumulate_F(small_run, tau)
    af_tau = a_filter(frame_window(small_run, tau)).values.astype(np.int64)
    np.testing.assert_array_equal(tr.F - (af_tau - 2) // 2, mcl_lambda(small_run).per_cell_sums)
    assert len(tr.odd_counts) == tau + 1


def test_global_a_counts_match_frames(small_run):
    counts = global_a_counts(small_run, -3, 12)
    direct = [count_states(Grid(c))[0] for _, c in small_run.iter_cells(-3, 12)]
    assert list(counts) == direct


def test_integral_single_frame_and_additivity(small_run):
    tau = small_run.t_half
    n = small_run.start.size
    for t in (0, 3, tau):
        single = a_filter(frame_window(small_run, t)).values.astype(np.int64).sum() - 2 * n
        w = 0.5 if t in (0, tau) else 1.0
        assert main_integral(small_run, t, t) == w * single
    mid = tau // 2
    assert main_integral(small_run, 0, mid) + main_integral(small_run, mid + 1, tau) == \
        main_integral(small_run, 0, tau)


def test_integral_series_cumulative(small_run):
    S = integral_series(small_run)
    assert len(S) == small_run.t_half + 1
    np.testing.assert_allclose(np.diff(S), integral_terms(small_run, 1, small_run.t_half))


# ----------------------------------------------------------------- fitting

def synthetic(flip_times, n=600, c=7.0, k=0.5, continuous=False):
    """Median stream with residue changes at ``flip_times`` and an exact model."""
    t = np.arange(2, n, 3)
    ids = np.zeros(len(t), dtype=int)
    for ft in flip_times:
        ids[t >= ft] += 1
    ids %= 3
    S = 0.01 * np.arange(n) ** 1.5 + 40 * np.sin(np.arange(n) / 37)
    sigma = np.ones(len(t))
    shift = np.zeros(len(t))
    sign, off = 1.0, 0.0
    for j in range(len(t) - 1, -1, -1):
        if j < len(t) - 1 and ids[j] != ids[j + 1]:
            if continuous:
                # continuity at the later point of the flip
                off += 2 * sign * S[t[j + 1]]
            sign = -sign
        sigma[j], shift[j] = sign, off
    M = c + k * (sigma * S[t] + shift)
    return MedianSeries(t, M, ids), S, t[-1]


@pytest.mark.parametrize("flips", [[], [200], [150, 330, 480]])
def test_fit_recovers_plain_model(flips):
    med, S, tau = synthetic(flips)
    fit = fit_symmetry(med, S, tau, t_from=0, sigma0=1, continuous=False)
    assert fit.k == pytest.approx(0.5, abs=1e-9) and fit.m0 == pytest.approx(7.0, abs=1e-6)
    assert fit.residual < 1e-9 and fit.correlation == pytest.approx(1.0)


@pytest.mark.parametrize("flips", [[200], [150, 330, 480]])
def test_fit_recovers_continuous_model(flips):
    med, S, tau = synthetic(flips, continuous=True)
    fit = fit_symmetry(med, S, tau, t_from=0, sigma0=1)
    assert fit.k == pytest.approx(0.5, abs=1e-9)
    assert fit.residual < 1e-9
    assert len(fit.segments) == len(flips) + 1


@given(st.floats(-5, 5), st.floats(0.05, 3))
@settings(max_examples=30, deadline=None)
def test_fit_sign_normalised(c, k):
    med, S, tau = synthetic([250], c=c, k=-k, continuous=True)
    fit = fit_symmetry(med, S, tau, t_from=0, sigma0=1)
    assert fit.k == pytest.approx(k, rel=1e-6)
    assert fit.segments[-1].sign == -1


def test_fit_no_signal():
    med = MedianSeries(np.array([2, 5]), np.array([1.0, 2.0]), np.array([0, 0]))
    with pytest.raises(ValueError, match="no signal"):
        fit_symmetry(med, np.zeros(10), 5, t_from=0)


def test_series_csv_columns():
    text = series_csv([0, 5, 7, 1, 6, 8], S=[0, 1, 2, 3, 4, 5])
    lines = text.splitlines()
    assert lines[0] == "t,phase0,phase1,phase2,M,phase_id,S"
    assert lines[1] == "0,0,,,,,0"
    assert lines[3] == "2,0,5,7,5,1,2"
    assert lines[4] == "3,1,5,7,5,1,3"


def test_median_min_run_absorbs_flicker():
    # residue 1 holds the median, residue 0 briefly takes over for one block
    nc = [5, 6, 9] * 4 + [6, 5, 9] + [5, 6, 9] * 4
    raw = median_series(nc)
    assert list(raw.phase_id) == [1] * 4 + [0] + [1] * 4
    smooth = median_series(nc, min_run=2)
    assert list(smooth.phase_id) == [1] * 9
    np.testing.assert_array_equal(smooth.values, raw.values)
