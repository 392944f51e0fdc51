import math

import numpy as np
import pytest

from vehctl import cli
from vehctl.harness import io
from vehctl.harness.scenario import (ScenarioError, build_scenario, double_lane_change,
                                     general_track, load_config, load_scenario,
                                     shipped_scenarios)
from vehctl.harness.sim import COLUMNS, compare, count_violations, run, speed_problem, summarize
from vehctl.mpc import ENHANCED

GAINS = {"tune": False, "gains": [5.52, 0.0547, 0.469]}


def straight(**over):
    cfg = {
        "format_version": 1, "name": "straight",
        "trajectory": {"kind": "track", "segments": [[400.0, 0.0]]},
        "speed": {"unit": "kmh", "stations": [0.0], "values": [50.0]},
        "wind": {"peak": 0.0, "randomize": False},
        "rls_noise": {"force_sigma": 0.0},
        "pid": GAINS,
    }
    cfg.update(over)
    return build_scenario(cfg)


@pytest.fixture(scope="module")
def dlc():
    return double_lane_change(seed=0, pid=GAINS)


@pytest.fixture(scope="module")
def dlc_result(dlc):
    return run(dlc)


def test_dlc_geometry(dlc):
    tr = dlc.track
    assert tr.offset[0] == 0.0 and tr.offset[-1] == 0.0
    assert tr.offset.max() == pytest.approx(3.5, abs=1e-12)
    slope = np.gradient(tr.offset, tr.s)
    np.testing.assert_allclose(tr.offset_slope, slope, atol=2e-4)
    np.testing.assert_allclose(tr.ref_heading(tr.s), np.arctan(tr.offset_slope), atol=1e-15)


def test_dlc_speed_band(dlc):
    assert dlc.v_ref.min() >= 50 / 3.6 - 1e-9
    assert dlc.v_ref.max() <= 65 / 3.6 + 1e-9
    assert round(dlc.v_ref.min(), 2) == 13.89 and round(dlc.v_ref.max(), 2) == 18.06


def test_dlc_overrides():
    sc = double_lane_change(trajectory={"lane_offset": 2.0}, pid=GAINS)
    assert sc.track.offset.max() == pytest.approx(2.0)


def test_wind_seeded():
    a, b, c = (double_lane_change(seed=s, pid=GAINS).env.wind for s in (1, 1, 2))
    assert a == b and a != c
    assert a.peak == 8.0 and a.heading_rate != 0.0


def test_shipped_scenarios_load():
    files = shipped_scenarios()
    assert {f.stem for f in files} == {"double_lane_change", "general_track"}
    np.testing.assert_array_equal(load_scenario(files[0]).v_ref, double_lane_change().v_ref)
    np.testing.assert_array_equal(load_scenario("general_track").v_ref, general_track().v_ref)


@pytest.mark.parametrize("patch", [
    {"format_version": 2},
    {"trajectory": {"kind": "spiral"}},
    {"speed": {"unit": "mph", "stations": [0.0], "values": [10.0]}},
    {"speed": {"stations": [0.0, 0.0], "values": [10.0, 10.0]}},
    {"road": {"mu": 2.0}},
    {"pid": {"tune": False}},
    {"mpc": {"N_p": 0}},
    {"vehicle": {"m": -1.0}},
    {"vehicle": {"mass": 1.0}},
    {"rates": {"dt_ctrl": 0.0105}},
])
def test_invalid_scenarios(patch):
    cfg = load_config("double_lane_change")
    cfg.update(patch)
    with pytest.raises(ScenarioError):
        build_scenario(cfg)


def test_not_a_mapping(tmp_path):
    p = tmp_path / "x.yaml"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ScenarioError):
        load_scenario(p)
    p.write_text("a: [\n")
    with pytest.raises(ScenarioError):
        load_scenario(p)


def test_speed_respects_curvature_limit():
    sc = general_track(speed={"values": [45, 200, 52, 66, 55, 60]}, pid=GAINS)
    vm = np.sqrt(9.81 * 0.95 / np.maximum(np.abs(sc.track.ref_curvature(sc.stations_nominal)), 1e-12))
    assert np.all(sc.v_ref <= vm + 1e-9)


def test_straight_regulation():
    res = run(straight(pid={"tune": True}))
    assert res.summary["position_mse"] < 1e-6
    err = np.array(res.trace["v_ref"]) - np.array(res.trace["v"])
    tail = np.abs(err[len(err) // 2:])
    assert np.all(np.diff(tail) <= 1e-12) and tail[-1] < 5e-4
    assert res.violations == 0 and not res.aborted


def test_dlc_run_clean(dlc_result):
    s = dlc_result.summary
    assert dlc_result.violations == 0 and dlc_result.fallbacks == 0
    assert not dlc_result.aborted
    assert s["max_position_error"] < 0.1


def test_summary_recomputed_from_trace(dlc_result):
    tr = dlc_result.trace
    ey = np.array(tr["y"]) - np.array(tr["y_ref"])
    assert dlc_result.summary["position_mse"] == pytest.approx(np.mean(ey ** 2), rel=1e-12)
    assert summarize(tr) == {k: dlc_result.summary[k] for k in summarize(tr)}


def test_speed_mse_equals_tuning_loop(dlc, dlc_result):
    mse = speed_problem(dlc).mse(dlc_result.gains.as_tuple())
    assert dlc_result.summary["speed_mse"] == pytest.approx(mse, rel=1e-12)


def test_steering_limits_in_trace(dlc, dlc_result):
    d = np.array(dlc_result.trace["delta_f"])
    assert np.all(np.abs(d) <= math.pi / 6)
    assert np.all(np.abs(np.diff(d)) <= math.pi / 12)
    assert count_violations(dlc_result.trace, dlc) == 0


def test_violation_counter_detects():
    sc = straight()
    res = run(sc)
    tr = {k: list(v) for k, v in res.trace.items()}
    tr["delta_f"][10] = 0.2
    assert count_violations(tr, sc) >= 1


def test_general_track_bounded():
    res = run(general_track(pid=GAINS))
    assert res.violations == 0 and not res.aborted
    assert res.summary["max_position_error"] < 0.5


def test_rls_converges_in_cornering():
    sc = general_track(pid=GAINS, rls_noise={"force_sigma": 0.0})
    res = run(sc)
    p = sc.params
    cf, cr = res.trace["cf_hat"][-1], res.trace["cr_hat"][-1]
    assert abs(cf / p.c_f_true - 1) < 0.05
    assert abs(cr / p.c_r_true - 1) < 0.05


def test_compare_same_mode_identical(dlc):
    a, b = compare(dlc, (ENHANCED, ENHANCED))
    assert a.summary == b.summary
    assert a.trace == b.trace


def test_compare_report(dlc):
    results = compare(dlc)
    text = io.report(results)
    for label in ("speed MSE", "position MSE", "heading MSE"):
        assert label in text
    assert "standard" in text and "enhanced" in text
    assert "max position error < 0.05 m" in text


def test_abort_flag():
    res = run(straight(speed={"unit": "kmh", "stations": [0.0], "values": [230.0]}))
    assert res.aborted and res.n == 0


def test_csv_roundtrip(tmp_path, dlc_result):
    path = io.export_csv(dlc_result, tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert all(len(line.split(",")) == 17 for line in lines)
    back = io.read_csv(path)
    s = summarize(back)
    for k in ("speed_mse", "position_mse", "heading_mse"):
        assert s[k] == pytest.approx(dlc_result.summary[k], rel=1e-12, abs=1e-15)


def test_csv_empty_trace(tmp_path):
    res = run(straight(speed={"unit": "kmh", "stations": [0.0], "values": [230.0]}))
    path = io.export_csv(res, tmp_path / "e.csv")
    assert path.read_text() == ",".join(COLUMNS) + "\n"


def test_csv_io_error(tmp_path, dlc_result):
    with pytest.raises(io.ExportError):
        io.export_csv(dlc_result, tmp_path / "missing" / "t.csv")


def test_solve_ms_only_with_timing(dlc):
    assert set(run(dlc).trace["solve_ms"]) == {0.0}
    assert max(run(dlc, timing=True).trace["solve_ms"]) > 0.0


def write_fixed(tmp_path, name="fixed.yaml", **over):
    import yaml
    cfg = load_config("double_lane_change")
    cfg["pid"] = dict(GAINS)
    cfg.update(over)
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def test_cli_run_and_compare(tmp_path):
    sc = write_fixed(tmp_path)
    assert cli.main(["run", "--scenario", str(sc), "--out", str(tmp_path / "r"), "--quiet"]) == 0
    assert (tmp_path / "r" / "trace_enhanced.csv").exists()
    assert "position_mse=" in (tmp_path / "r" / "summary.txt").read_text()
    assert cli.main(["compare", "--scenario", str(sc), "--seed", "4",
                     "--out", str(tmp_path / "c"), "--quiet"]) == 0
    for name in ("compare_standard.csv", "compare_enhanced.csv", "report.txt", "summary.txt"):
        assert (tmp_path / "c" / name).exists()


def test_cli_sweep(tmp_path):
    sc = write_fixed(tmp_path)
    rc = cli.main(["sweep", "--scenario", str(sc), "--key", "mpc.beta", "--values", "1.0,3.5",
                   "--out", str(tmp_path / "s"), "--quiet"])
    assert rc == 0
    text = (tmp_path / "s" / "sweep_summary.txt").read_text()
    assert "0.mpc.beta=1.0" in text and "1.mpc.beta=3.5" in text


def test_cli_tune(tmp_path):
    rc = cli.main(["tune", "--out", str(tmp_path), "--quiet"])
    assert rc == 0
    gains = dict(line.split("=") for line in (tmp_path / "gains.txt").read_text().split())
    assert set(gains) == {"K_p", "K_i", "K_d", "speed_mse"}
    assert len((tmp_path / "pso_history.csv").read_text().splitlines()) == 27


def test_cli_exit_codes(tmp_path):
    assert cli.main(["run", "--scenario", str(tmp_path / "nope.yaml"),
                     "--out", str(tmp_path), "--quiet"]) == 1
    bad = write_fixed(tmp_path, "bad.yaml", format_version=9)
    assert cli.main(["run", "--scenario", str(bad), "--out", str(tmp_path), "--quiet"]) == 1
    fast = write_fixed(tmp_path, "fast.yaml",
                       speed={"unit": "kmh", "stations": [0.0], "values": [230.0]},
                       trajectory={"kind": "track", "segments": [[900.0, 0.0]]})
    assert cli.main(["run", "--scenario", str(fast), "--out", str(tmp_path), "--quiet"]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["run", "--scenario", str(bad), "--out", str(blocker / "sub"), "--quiet"]) == 3
