import json

import numpy as np
import pytest

from dcsoliton.harness import (
    ConfigError, RunSpec, SweepConfig, SweepRow, build_record, load_record, lower_median, read_results,
    rows_to_csv, run_experiment, scaling_report, sweep, trajectory_from_record, write_record, write_results,
)
from dcsoliton import bundled_mask, random_initial, run_to_mirror


def small_config(**over):
    raw = {"masks": ["2d-r1-moore", "2d-r2-balanced"], "dims": [12, 12], "n_points": 4,
           "seeds": [2, 0, 1], "max_steps": 5000, "analyses": ["mcl", "events"]}
    raw.update(over)
    return SweepConfig.from_dict(raw)


def test_cross_product_and_order():
    rows = sweep(small_config())
    assert len(rows) == 6
    assert [(r.mask_id, r.seed) for r in rows] == [
        ("2d-r1-moore", 0), ("2d-r1-moore", 1), ("2d-r1-moore", 2),
        ("2d-r2-balanced", 0), ("2d-r2-balanced", 1), ("2d-r2-balanced", 2)]
    for r in rows:
        assert r.returned and r.lambda_ is not None and r.local_reversal_count >= 1 and r.error == ""


def test_csv_deterministic_across_jobs(tmp_path):
    cfg = small_config()
    a = rows_to_csv(sweep(cfg, jobs=1))
    b = rows_to_csv(sweep(cfg, jobs=2))
    assert a == b
    assert a.splitlines()[0] == "mask_id,seed,dims,n_points,returned,t_half,lambda,local_reversal_count,superriver_early,error"


def test_results_roundtrip_and_timing_sidecar(tmp_path):
    rows = sweep(small_config(seeds=[0]))
    out = tmp_path / "t.csv"
    write_results(rows, out)
    assert "wall_ms" not in out.read_text()
    assert (tmp_path / "t.csv.timing.csv").read_text().startswith("mask_id,seed,dims,n_points,wall_ms")
    back = read_results(out)
    assert [(r.mask_id, r.t_half, r.lambda_) for r in back] == [(r.mask_id, r.t_half, r.lambda_) for r in rows]


def test_records_dir(tmp_path):
    cfg = SweepConfig.from_dict({"masks": ["2d-r1-moore"], "dims": [[12, 12]], "n_points": [4],
                                 "seeds": {"start": 0, "count": 2}, "records_dir": "runs"}, base=tmp_path)
    sweep(cfg)
    files = sorted((tmp_path / "runs").iterdir())
    assert [f.name for f in files] == ["2d-r1-moore_12x12_n4_s0.json", "2d-r1-moore_12x12_n4_s1.json"]
    rec = load_record(files[0])
    traj = trajectory_from_record(rec)
    assert traj.frame(2 * traj.t_half) == traj.start
    assert rec["analysis"]["mcl_all_equal"] is True


@pytest.mark.parametrize("raw,msg", [
    ({"masks": ["2d-r1-moore"], "dims": [8, 8], "n_points": 2}, "seeds"),
    ({"masks": ["2d-r1-moore"], "dims": [8, 8], "n_points": 2, "seeds": [1], "bogus": 1}, "unknown"),
    ({"masks": ["2d-r1-moore"], "dims": [8, 8, 8], "n_points": 2, "seeds": [1]}, "dimension"),
    ({"masks": ["2d-r1-moore"], "dims": [8, 8], "n_points": 2, "seeds": [1, 1]}, "distinct"),
    ({"masks": ["2d-r1-moore"], "dims": [8, 8], "n_points": 2, "seeds": [1], "analyses": ["x"]}, "analyses"),
    ({"masks": ["2d-r1-moore"], "dims": [8, 8], "n_points": 2, "seeds": [1], "boundary": "P"}, "boundary"),
])
def test_config_errors(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        SweepConfig.from_dict(raw)


def test_config_from_file_with_mask_path(tmp_path):
    (tmp_path / "vn.mask").write_text(bundled_mask("2d-r1-vonneumann").to_text())
    (tmp_path / "s.json").write_text(json.dumps(
        {"masks": [{"id": "mine", "path": "vn.mask"}], "dims": [6, 6], "n_points": 1, "seeds": [0]}))
    cfg = SweepConfig.load(tmp_path / "s.json")
    assert cfg.masks[0][0] == "mine"


def test_bad_point_count_is_row_error():
    spec = RunSpec("2d-r1-moore", bundled_mask("2d-r1-moore").to_text(), (2, 2), "PP", 9, 0)
    row, rec = run_experiment(spec)
    assert rec is None and "do not fit" in row.error


def test_all_a_run_lambda():
    spec = RunSpec("2d-r1-moore", bundled_mask("2d-r1-moore").to_text(), (6, 6), "PP", 0, 0)
    row, rec = run_experiment(spec)
    assert row.returned and row.t_half == 1 and row.lambda_ == 1
    assert rec["analysis"]["events"] == [[1, 1, 0]]


def test_unreturned_row_has_no_lambda():
    spec = RunSpec("2d-r1-moore", bundled_mask("2d-r1-moore").to_text(), (30, 30), "PP", 8, 0, max_steps=20)
    row, _ = run_experiment(spec)
    assert not row.returned and row.lambda_ is None and row.error == ""


def test_skip_unscreened():
    spec = RunSpec("2d-r1-moore", bundled_mask("2d-r1-moore").to_text(), (6, 6), "PP", 0, 0,
                   early_screen=50, skip_unscreened=True)
    row, rec = run_experiment(spec)
    assert row.superriver_early is False and row.error.startswith("skipped") and rec is None


def test_record_roundtrip(tmp_path):
    mask = bundled_mask("2d-r1-moore")
    start = random_initial((12, 12), 4, 0)
    out = run_to_mirror(start, mask)
    rec = build_record("m", mask, start, out, 4, 0, 100_000)
    write_record(rec, tmp_path / "r.json")
    back = load_record(tmp_path / "r.json")
    traj = trajectory_from_record(back)
    assert traj.start == start and traj.mask == mask and traj.t_half == out.t_half
    np.testing.assert_array_equal(traj.outcome.nc_series, out.nc_series)


def test_load_record_rejects_other_json(tmp_path):
    (tmp_path / "x.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError, match="unsupported"):
        load_record(tmp_path / "x.json")


def row(dims, t_half, seed=0):
    return SweepRow("m", seed, dims, 8, t_half is not None, t_half, None, None, None)


def test_lower_median():
    assert lower_median([5, 1, 3, 7]) == 3
    assert lower_median([4]) == 4


def test_scaling_single_size():
    rep = scaling_report([row((30, 30), t) for t in range(10, 30)])
    assert len(rep) == 1 and rep[0].ratio is None and rep[0].median_t_half == 19


def test_scaling_ratios_and_flags():
    rows = [row((30, 30), 100 + s, s) for s in range(10)]
    rows += [row((40, 40), 220 + s, s) for s in range(10)]
    rows += [row((50, 50), 500, s) for s in range(3)] + [row((50, 50), None, s) for s in range(3, 10)]
    rep = scaling_report(rows, min_returned=10)
    assert [e.dims for e in rep] == [(30, 30), (40, 40), (50, 50)]
    assert rep[1].ratio == pytest.approx(224 / 104)
    assert not rep[2].sufficient and rep[2].ratio is None
