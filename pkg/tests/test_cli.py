import csv
import json

import pytest

from mmsounder.cli import EXIT_INVALID, EXIT_RUNTIME, main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_codebook_command(tmp_path, capsys):
    out = tmp_path / "cb.csv"
    assert main(["codebook", "--cells", "200", "--elevation-span", "60", "--beam-type", "2", "--out", str(out)]) == 0
    assert len(rows(out)) == 200
    assert capsys.readouterr().out.count(": 50 beams") == 4


def test_codebook_four_cells(tmp_path):
    out = tmp_path / "cb4.csv"
    assert main(["codebook", "--cells", "4", "--out", str(out)]) == 0
    assert sorted(int(r["sector"]) for r in rows(out)) == [0, 1, 2, 3]


def test_codebook_rejects_six_cells(tmp_path, capsys):
    assert main(["codebook", "--cells", "6", "--out", str(tmp_path / "x.csv")]) == EXIT_INVALID
    assert "multiple of 4" in capsys.readouterr().err


def test_codebook_global_out_directory(tmp_path):
    assert main(["--out", str(tmp_path / "d"), "codebook", "--cells", "8"]) == 0
    assert len(rows(tmp_path / "d" / "codebook.csv")) == 8


def test_static_v2i_one_second(tmp_path):
    out = tmp_path / "run"
    assert main(["--seed", "5", "--out", str(out), "simulate", "static_v2i"]) == 0
    records = rows(out / "capture.csv")
    assert len(records) == 32000
    assert len({r["sweep_index"] for r in records}) == 160
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 5 and manifest["tool_version"]
    for name in ("gps_rx.csv", "gps_tx.csv", "scenario.yaml", "codebook.csv"):
        assert (out / name).is_file()


def test_simulate_is_reproducible_with_inputs_hashed(tmp_path):
    scenario = tmp_path / "s.yaml"
    scenario.write_text(
        "tx: {position_m: [0, 0, 2.9]}\n"
        "rx: {waypoints: [[0, 0, 10, 2.4], [0.05, 0, 10.4, 2.4]]}\n"
        "rng_seed: 1\n"
    )
    assert main(["codebook", "--cells", "8", "--out", str(tmp_path / "cb.csv")]) == 0
    for name in ("a", "b"):
        args = ["--seed", "42", "--out", str(tmp_path / name), "simulate", str(scenario),
                "--codebook", str(tmp_path / "cb.csv"), "--pdp"]
        assert main(args) == 0
    for name in ("capture.csv", "gps_rx.csv", "gps_tx.csv", "pdp.bin", "pdp_index.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert set(manifest["input_sha256"]) == {"scenario", "codebook"}
    assert manifest["scenario_path"] == str(scenario)


def test_schema_error_reports_field(tmp_path, capsys):
    scenario = tmp_path / "s.yaml"
    scenario.write_text("tx: {position_m: [0, 0]}\nrx: {position_m: [0, 5, 2]}\nduration_s: 0.01\n")
    assert main(["simulate", str(scenario), "--out", str(tmp_path / "o")]) == EXIT_INVALID
    assert "tx.position_m" in capsys.readouterr().err


def test_missing_trajectory_coverage(tmp_path, capsys):
    scenario = tmp_path / "s.yaml"
    scenario.write_text(
        "tx: {position_m: [0, 0, 2.9]}\n"
        "rx: {waypoints: [[0, 0, 10, 2.4], [0.01, 0, 10.1, 2.4]]}\n"
        "duration_s: 5\n"
    )
    assert main(["simulate", str(scenario), "--out", str(tmp_path / "o")]) == EXIT_RUNTIME
    assert "span" in capsys.readouterr().err


def test_unknown_scenario(tmp_path):
    assert main(["simulate", "no_such_thing", "--out", str(tmp_path)]) == EXIT_INVALID


def test_analyze_round_trip(tmp_path, capsys):
    run = tmp_path / "run"
    assert main(["--seed", "2", "--out", str(run), "simulate", "roof_reflector_drive", "--duration", "4"]) == 0
    assert main(["analyze", str(run)]) == 0
    report = run / "report"
    fits = {(r["category"], r["los"]): float(r["n"]) for r in rows(report / "ci_fits.csv")}
    assert fits[("best", "NLOS")] < fits[("boresight", "NLOS")]
    hist = rows(report / "elevation_hist.csv")
    assert sum(float(r["fraction"]) for r in hist) == pytest.approx(1.0, abs=1e-5)
    assert (report / "heatmap_sweep_0.csv").is_file()
    assert "4 m local-square" in (report / "notes.txt").read_text()
    assert json.loads((report / "manifest.json").read_text())["command"] == "analyze"


def test_analyze_los_only_notes_absent_nlos(tmp_path):
    scenario = tmp_path / "los.yaml"
    scenario.write_text(
        "tx: {position_m: [0, 0, 2.9]}\n"
        "rx: {waypoints: [[0, 0, 10, 2.4], [2, 0, 30, 2.4]]}\n"
        "sweep_interval_s: 0.1\n"
    )
    run = tmp_path / "run"
    assert main(["--out", str(run), "simulate", str(scenario)]) == 0
    assert main(["analyze", str(run), "--out", str(tmp_path / "rep")]) == 0
    labels = {r["los"] for r in rows(tmp_path / "rep" / "ci_fits.csv")}
    assert labels == {"LOS"}
    assert "NLOS: no samples" in (tmp_path / "rep" / "notes.txt").read_text()


def test_analyze_missing_gps(tmp_path):
    run = tmp_path / "run"
    assert main(["--out", str(run), "simulate", "anechoic"]) == 0
    (run / "gps_rx.csv").unlink()
    assert main(["analyze", str(run)]) == EXIT_RUNTIME


def test_verify_passes(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "verify"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "5/5 checks passed" in out
    assert (tmp_path / "verify.txt").is_file()


def test_version():
    assert main(["--version"]) == 0


def test_analyze_recovers_synthetic_exponent(tmp_path):
    """Capture whose best-beam powers follow a CI model with n = 1.70, sigma = 3 dB."""
    import numpy as np

    from mmsounder.channel import Scenario, fspl
    from mmsounder.codebook import build_codebook, nearest_beam
    from mmsounder.config import dump_scenario
    from mmsounder.geo import Trajectory, los_direction, synthesize_gps, write_gps_csv
    from mmsounder.sounder import SweepRecord, sweep_ns, write_capture_csv

    n_true, sigma, n_sweeps, stride = 1.70, 3.0, 500, 40_000_000
    duration = n_sweeps * stride * 1e-9
    rx = Trajectory.from_waypoints([(0.0, (0.0, 10.0, 2.0)), (duration, (0.0, 200.0, 2.0))])
    sc = Scenario(Trajectory.static((0.0, 0.0, 2.0)), rx, noise_figure=None, gps_noise_sigma=0.0,
                  sweep_interval=stride * 1e-9)
    cb = build_codebook()
    rng = np.random.default_rng(170)
    half = sweep_ns(sc, cb) // 2
    gain = sc.tx_power_in + sc.tx_beam_type.boresight_gain + sc.rx_beam_type.boresight_gain
    records = []
    for k in range(n_sweeps):
        t0 = k * stride
        pos = rx.position((t0 + half) * 1e-9)
        d = float(np.linalg.norm(pos - np.array([0.0, 0.0, 2.0])))
        pl = fspl(28.3e9, 1.0) + 10 * n_true * np.log10(d) + rng.normal(0.0, sigma)
        target = nearest_beam(cb, los_direction(pos, rx.heading(0.0), (0.0, 0.0, 2.0))).index
        for b in cb:
            stamp = t0 + cb.slot_of(b.index) * 125_000
            power = gain - pl if b.index == target else -150.0
            records.append(SweepRecord(k, b.index, stamp, power, power < -100.0, b.azimuth, b.elevation))

    run = tmp_path / "synthetic"
    run.mkdir()
    write_capture_csv(run / "capture.csv", records)
    end = (n_sweeps - 1) * stride + 2 * half
    write_gps_csv(run / "gps_rx.csv", synthesize_gps(rx, 0, end, 0.0, rng))
    write_gps_csv(run / "gps_tx.csv", synthesize_gps(sc.tx_trajectory, 0, end, 0.0, rng))
    dump_scenario(sc, run / "scenario.yaml")
    cb.to_csv(run / "codebook.csv")

    assert main(["analyze", str(run)]) == 0
    fits = {(r["category"], r["los"]): r for r in rows(run / "report" / "ci_fits.csv")}
    assert 1.65 <= float(fits[("best", "LOS")]["n"]) <= 1.75
