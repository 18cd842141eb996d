"""Series-level analysis of a run: N_C phases, the median graph, the per-cell
conservation law, the Main Integral and the signed median fit."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .engine import Trajectory
from .filters import WINDOW_AFTER, WINDOW_BEFORE
from .lattice import count_states


class NotReturnedError(ValueError):
    pass


# --------------------------------------------------------------- phases

@dataclass(frozen=True, eq=False)
class PhaseSeries:
    phases: tuple[np.ndarray, np.ndarray, np.ndarray]
    length: int

    def __getitem__(self, p: int) -> np.ndarray:
        return self.phases[p]

    def times(self, p: int) -> np.ndarray:
        return np.arange(p, self.length, 3)


def phase_series(nc_series: Sequence[int]) -> PhaseSeries:
    nc = np.asarray(nc_series, dtype=np.int64)
    return PhaseSeries((nc[0::3], nc[1::3], nc[2::3]), len(nc))


@dataclass(frozen=True, eq=False)
class MedianSeries:
    t: np.ndarray
    values: np.ndarray
    phase_id: np.ndarray

    def flips(self) -> np.ndarray:
        """Times at which the median residue changes."""
        change = np.nonzero(np.diff(self.phase_id))[0] + 1
        return self.t[change]


def _absorb_short_runs(ids: np.ndarray, min_run: int) -> np.ndarray:
    """Relabel residue runs shorter than ``min_run`` samples with the residue before them."""
    out = ids.copy()
    start = 0
    for k in range(1, len(ids) + 1):
        if k < len(ids) and ids[k] == ids[start]:
            continue
        if start > 0 and k - start < min_run:
            out[start:k] = out[start - 1]
        start = k
    return out


def median_series(nc_series: Sequence[int] | PhaseSeries, per_block: bool = True,
                  use_mean: bool = False, min_run: int = 1) -> MedianSeries:
    """Middle order statistic of the three latest values (one per residue).

    With ``per_block`` the median is taken once per complete block
    ``3m .. 3m+2`` and stamped at ``t = 3m+2``; otherwise it slides every
    frame from t = 2.  On a tie at the median value the previous residue is
    kept if it is among the tied ones, otherwise the smallest tied residue
    wins.  ``use_mean`` replaces the value (not the residue) by the mean.
    ``min_run > 1`` ignores residue changes that last fewer samples (near-tie
    flicker); the values are untouched.
    """
    if isinstance(nc_series, PhaseSeries):
        nc = np.empty(nc_series.length, dtype=np.int64)
        for p in range(3):
            nc[p::3] = nc_series[p]
    else:
        nc = np.asarray(nc_series, dtype=np.int64)
    n = len(nc)
    ts = np.arange(2, n, 3) if per_block else np.arange(2, n)
    values = np.empty(len(ts))
    ids = np.empty(len(ts), dtype=np.int64)
    prev = -1
    for k, t in enumerate(ts):
        trio = nc[t - 2:t + 1]
        med = int(np.sort(trio)[1])
        tied = sorted(int((t - 2 + j) % 3) for j in range(3) if trio[j] == med)
        pid = prev if prev in tied else tied[0]
        values[k] = trio.mean() if use_mean else med
        ids[k] = pid
        prev = pid
    if min_run > 1:
        ids = _absorb_short_runs(ids, min_run)
    return MedianSeries(ts, values, ids)


# ------------------------------------------------------- conservation law

def _a_filter_stream(traj: Trajectory, t0: int, t1: int) -> Iterator[tuple[int, np.ndarray]]:
    """A_F(t) for t0 <= t <= t1 as a running six-frame sum of A indicators."""
    span = WINDOW_BEFORE + WINDOW_AFTER + 1
    ring: list[np.ndarray] = []
    total = None
    for u, cells in traj.iter_cells(t0 - WINDOW_BEFORE, t1 + WINDOW_AFTER):
        a = (cells == 0).astype(np.int64)
        ring.append(a)
        total = a.copy() if total is None else total + a
        if len(ring) > span:
            total -= ring.pop(0)
        if len(ring) == span:
            yield u - WINDOW_AFTER, total


@dataclass(frozen=True, eq=False)
class FTrace:
    F: np.ndarray
    odd_counts: np.ndarray  # odd-valued cells of F(t), t = 0 .. t_last


def accumulate_F(traj: Trajectory, t: int) -> FTrace:
    """F(t) = (A_F(0) - 2)/2 + sum_{q=1..t} (A_F(q) - 2), with an odd-cell census."""
    if t < 0:
        raise ValueError("t must be >= 0")
    F = None
    odd = []
    for q, af in _a_filter_stream(traj, 0, t):
        if q == 0:
            if np.any(af % 2):
                raise ValueError("A_F(0) is odd somewhere; the start is not a mirror state")
            F = (af - 2) // 2
        else:
            F = F + (af - 2)
        odd.append(int(np.count_nonzero(F % 2)))
    return FTrace(F, np.array(odd, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class MclResult:
    per_cell_sums: np.ndarray
    all_equal: bool
    divisible_by_4: bool
    lam: int | None

    @property
    def lambda_(self) -> int | None:
        return self.lam


def _require_returned(traj: Trajectory) -> int:
    if traj.t_half is None:
        raise NotReturnedError("MCL requires a closed run")
    return traj.t_half


def mcl_lambda(traj: Trajectory) -> MclResult:
    """Half-weighted per-cell sum of (A_F - 2) over t = 0 .. t_half."""
    tau = _require_returned(traj)
    acc2 = None  # twice the per-cell sum
    for q, af in _a_filter_stream(traj, 0, tau):
        w = 1 if q in (0, tau) else 2
        term = w * (af - 2)
        acc2 = term if acc2 is None else acc2 + term
    if np.any(acc2 % 2):
        raise ValueError("endpoint filters are not even; inconsistent mirror point")
    sums = acc2 // 2
    first = int(sums.flat[0])
    all_equal = bool(np.all(sums == first))
    div4 = bool(np.all(sums % 4 == 0))
    lam = first // 4 if (all_equal and div4) else None
    return MclResult(sums, all_equal, div4, lam)


# --------------------------------------------------------- main integral

def global_a_counts(traj: Trajectory, t0: int, t1: int) -> np.ndarray:
    """N_A(u) for u = t0 .. t1, from the N_C series where possible.

    Every B cell was C one step earlier, so N_A(u) = N - N_C(u) - N_C(u-1)
    for 1 <= u <= t_end; times outside are replayed.
    """
    n_cells = traj.start.size
    nc = traj.outcome.nc_series if traj.outcome is not None else np.zeros(1, np.int64)
    t_end = len(nc) - 1
    out = np.empty(t1 - t0 + 1, dtype=np.int64)
    for k, u in enumerate(range(t0, t1 + 1)):
        if 1 <= u <= t_end:
            out[k] = n_cells - nc[u] - nc[u - 1]
        elif u == 0:
            out[k] = count_states(traj.start)[0]
        else:
            out[k] = count_states(traj.frame(u))[0]
    return out


def integral_terms(traj: Trajectory, t0: int, t1: int) -> np.ndarray:
    """Weighted global sums w(q) * sum_v (A_F(q, v) - 2) for q = t0 .. t1.

    w(q) = 1/2 at q = 0 and at q = t_half (for returned runs), else 1.
    """
    n_a = global_a_counts(traj, t0 - WINDOW_BEFORE, t1 + WINDOW_AFTER)
    span = WINDOW_BEFORE + WINDOW_AFTER + 1
    window_sums = np.convolve(n_a, np.ones(span, dtype=np.int64), mode="valid")
    terms = (window_sums - 2 * traj.start.size).astype(float)
    qs = np.arange(t0, t1 + 1)
    half = qs == 0
    if traj.t_half is not None:
        half |= qs == traj.t_half
    terms[half] *= 0.5
    return terms


def main_integral(traj: Trajectory, t0: int, t: int) -> float:
    if t0 > t:
        raise ValueError("t0 must not exceed t")
    return float(integral_terms(traj, t0, t).sum())


def integral_series(traj: Trajectory, t_last: int | None = None) -> np.ndarray:
    """S(0, t) for t = 0 .. t_last (default t_half, or the last recorded step)."""
    if t_last is None:
        t_last = traj.t_half if traj.t_half is not None else traj.outcome.t_end
    return np.cumsum(integral_terms(traj, 0, t_last))


# ---------------------------------------------------------- median fit

@dataclass
class Segment:
    start: int
    sign: int
    offset: float


@dataclass
class SymmetryFit:
    k: float
    m0: float
    segments: list[Segment]
    residual: float
    correlation: float
    per_segment_residual: float
    t_from: int
    t_to: int
    model: np.ndarray = field(repr=False)


def _signed_integral(S: np.ndarray, ts: np.ndarray, ids: np.ndarray, sigma0: int,
                     continuous: bool = True):
    """Piecewise +-S walking back from the last time; the sign flips whenever
    the median residue changes.  ``continuous`` adds offsets that remove the
    jump at each flip."""
    g = np.empty(len(ts))
    sign, shift = sigma0, 0.0
    starts = []
    for k in range(len(ts) - 1, -1, -1):
        if k < len(ts) - 1 and ids[k] != ids[k + 1]:
            s_b = S[ts[k + 1]]
            starts.append((k + 1, sign, shift))
            # keep the model continuous at the flip time
            if continuous:
                shift = 2 * sign * s_b + shift
            sign = -sign
        g[k] = sign * S[ts[k]] + shift
    starts.append((0, sign, shift))
    return g, list(reversed(starts))


def fit_symmetry(median: MedianSeries, S: Sequence[float], t_half: int,
                 t_from: int | None = None, sigma0: int | None = None,
                 approach_window: int = 30, continuous: bool = True) -> SymmetryFit:
    """Fit M(t) ~ M0 + k * sigma(t) * S(t) over ``t_from <= t <= t_half``.

    ``S[t]`` is S(0, t).  ``sigma`` starts at the mirror with ``sigma0``
    (default: +1 when S approaches the mirror from below, -1 from above) and
    flips at each change of the median residue; segment offsets keep the
    model continuous (``continuous=False`` fits plain sigma * S).  k and M0
    come from one joint least-squares fit; a negative k is reported as
    positive with every sign flipped.
    """
    S = np.asarray(S, dtype=float)
    if t_from is None:
        t_from = t_half // 2
    keep = (median.t >= t_from) & (median.t <= t_half)
    ts, M, ids = median.t[keep], median.values[keep].astype(float), median.phase_id[keep]
    if len(ts) < 3:
        raise ValueError("no signal to fit")
    if np.ptp(S[ts]) == 0:
        raise ValueError("no signal to fit")
    if sigma0 is None:
        back = S[max(t_half - approach_window, 0)]
        sigma0 = 1 if S[t_half] >= back else -1
    g, starts = _signed_integral(S, ts, ids, sigma0, continuous)
    X = np.column_stack([np.ones_like(g), g])
    (m0, k), *_ = np.linalg.lstsq(X, M, rcond=None)
    if k < 0:
        k, g = -k, -g
        starts = [(i, -sg, -sh) for i, sg, sh in starts]
    model = m0 + k * g
    scale = np.std(M) if np.std(M) > 0 else 1.0
    residual = float(np.sqrt(np.mean((M - model) ** 2)) / scale)
    corr = float(np.corrcoef(M, model)[0, 1]) if np.std(model) > 0 and np.std(M) > 0 else 0.0
    # per-segment free k for the constancy check
    sq = 0.0
    bounds = [i for i, _, _ in starts] + [len(ts)]
    for a, b in zip(bounds[:-1], bounds[1:]):
        x = S[ts[a:b]]
        y = M[a:b]
        if b - a >= 2 and np.ptp(x) > 0:
            coef = np.polyfit(x, y, 1)
            sq += float(np.sum((np.polyval(coef, x) - y) ** 2))
    per_seg = float(np.sqrt(sq / len(ts)) / scale)
    segments = [Segment(int(ts[i]), int(sg), float(m0 + k * sh)) for i, sg, sh in starts]
    return SymmetryFit(float(k), float(m0), segments, residual, corr, per_seg,
                       int(ts[0]), int(ts[-1]), model)


# ------------------------------------------------------------- export

def series_csv(nc_series: Sequence[int], S: Sequence[float] | None = None) -> str:
    """Columns: t, phase0, phase1, phase2, M, phase_id, S (blank where undefined)."""
    nc = np.asarray(nc_series, dtype=np.int64)
    med = median_series(nc, per_block=False)
    m_at = {int(t): (v, p) for t, v, p in zip(med.t, med.values, med.phase_id)}
    last = [None, None, None]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "phase0", "phase1", "phase2", "M", "phase_id", "S"])
    for t, v in enumerate(nc):
        last[t % 3] = int(v)
        m, p = m_at.get(t, ("", ""))
        s = "" if S is None or t >= len(S) else _fmt(S[t])
        w.writerow([t, *("" if x is None else x for x in last), _fmt(m), p, s])
    return buf.getvalue()


def _fmt(x) -> str:
    if x == "":
        return ""
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)
