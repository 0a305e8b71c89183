import json
import math

import pytest

from specsense import cli
from specsense.cli import csv_bytes, main, read_csv
from specsense.config import RunConfig, load_config
from specsense.energy import Hypothesis
from specsense.integrate import SensingPath, integrated_sense
from specsense.wavelet import Occupancy

FAST = ["--set", "harness.trials=200", "--set", "harness.snr_grid_db=[-12.0, -5.0]",
        "--set", "harness.pfa_grid=[0.05, 0.1, 0.5]",
        "--set", "harness.fading_snr_grid_db=[-5.0, 0.0]", "--set", "harness.calibration_trials=10000",
        "--set", "harness.calibration_n_grid=[1, 16]"]


def run(tmp_path, *args, out="out"):
    return main([*args, "--out", str(tmp_path / out)])


def test_csv_roundtrip(tmp_path):
    rows = [(1, 0.1, 1e-300, "x,y", True), (-2, math.inf, 3.0, "z", False)]
    p = tmp_path / "t.csv"
    p.write_bytes(csv_bytes(("a", "b", "c", "d", "e"), rows))
    header, back = read_csv(p)
    assert header == ["a", "b", "c", "d", "e"]
    assert [tuple(r) for r in back] == rows


def test_snr_sweep_files(tmp_path):
    assert run(tmp_path, "snr-sweep", *FAST) == 0
    header, rows = read_csv(tmp_path / "out" / "pd_vs_snr.csv")
    assert header == ["snr_db", "pd_hat", "ci", "trials"]
    assert [r[0] for r in rows] == [-12.0, -5.0] and all(r[3] == 200 for r in rows)
    meta = json.loads((tmp_path / "out" / "pd_vs_snr.meta.json").read_text())
    assert meta["config"]["harness"]["trials"] == 200 and meta["command"] == "snr-sweep"


@pytest.mark.slow
def test_snr_sweep_default_config(tmp_path):
    assert run(tmp_path, "snr-sweep") == 0
    _, rows = read_csv(tmp_path / "out" / "pd_vs_snr.csv")
    row = next(r for r in rows if r[0] == -5.0)
    assert row[1] >= 0.99 and row[3] == 10_000


def test_meta_sidecar_reproduces_run(tmp_path):
    assert run(tmp_path, "roc", *FAST, "--seed", "77") == 0
    meta = json.loads((tmp_path / "out" / "roc.meta.json").read_text())
    files, _ = cli.cmd_roc(RunConfig.from_dict(meta["config"]))
    for name in ("roc.csv", "roc_noise_only.csv"):
        assert files[name] == (tmp_path / "out" / name).read_bytes()


@pytest.mark.parametrize("command,names", [
    ("roc", ["roc.csv", "roc_noise_only.csv"]),
    ("fading", ["pd_awgn.csv", "pd_rayleigh.csv"]),
    ("edges", ["multiscale.csv", "edges.csv"]),
    ("calibrate", ["cfar_calibration.csv"]),
])
def test_commands_write_parseable_csv(tmp_path, command, names):
    assert run(tmp_path, command, *FAST) == 0
    for name in names:
        header, rows = read_csv(tmp_path / "out" / name)
        assert rows and all(len(r) == len(header) for r in rows)


def test_edges_csv_columns(tmp_path):
    assert run(tmp_path, "edges") == 0
    header, rows = read_csv(tmp_path / "out" / "multiscale.csv")
    assert header == ["bin", "freq_hz", "psd", "w_1", "w_2", "w_3", "product"]
    assert len(rows) == 1024
    _, edges = read_csv(tmp_path / "out" / "edges.csv")
    assert sorted(round(e[1]) for e in edges) == [256, 512]


def test_missing_config_exit_1_no_outputs(tmp_path):
    assert run(tmp_path, "snr-sweep", "--config", str(tmp_path / "nope.toml")) == 1
    assert not (tmp_path / "out").exists()


def test_bad_override_exit_1(tmp_path, capsys):
    assert run(tmp_path, "roc", "--set", "detector.target_pfa=2") == 1
    assert "detector" in capsys.readouterr().err


def test_calibration_failure_exit_3(tmp_path, monkeypatch):
    from specsense.harness import CalibrationRow
    monkeypatch.setattr(cli.harness, "run_cfar_calibration",
                        lambda *a, **k: [CalibrationRow(1, 0.1, 0.5, 0.01, 10_000)])
    assert run(tmp_path, "calibrate") == 3
    _, rows = read_csv(tmp_path / "out" / "cfar_calibration.csv")
    assert rows[0][-1] is False


def test_unwritable_output_exit_2(tmp_path):
    (tmp_path / "blocker").write_text("x")
    assert main(["edges", "--out", str(tmp_path / "blocker" / "sub")]) == 2


def test_synth_deterministic(tmp_path):
    assert run(tmp_path, "synth", "--seed", "4", out="a") == 0
    assert run(tmp_path, "synth", "--seed", "4", out="b") == 0
    assert (tmp_path / "a" / "scene.iq").read_bytes() == (tmp_path / "b" / "scene.iq").read_bytes()
    truth = json.loads((tmp_path / "a" / "scene.truth.json").read_text())
    assert truth["master_seed"] == 4 and [o["status"] for o in truth["occupancy"]] == [
        "occupied", "vacant", "occupied"]


def test_synth_zero_length_exit_1(tmp_path):
    assert run(tmp_path, "synth", "--set", "scene.n_samples=0") == 1


def test_tone_roundtrip(tmp_path):
    assert run(tmp_path, "synth", "--set", "scene.kind=tone") == 0
    assert run(tmp_path, "sense", str(tmp_path / "out" / "scene.iq"), out="s") == 0
    report = json.loads((tmp_path / "s" / "report.json").read_text())
    assert report["path"] == "energy" and report["decision"]["hypothesis"] == "H1"
    header, rows = read_csv(tmp_path / "s" / "psd.csv")
    assert header == ["bin", "freq_hz", "psd"] and len(rows) == 1024


def test_plan_roundtrip_many_seeds():
    want = (Occupancy.OCCUPIED, Occupancy.VACANT, Occupancy.OCCUPIED)
    good = 0
    for seed in range(100):
        cfg = load_config(None, seed=seed)
        y, _ = cli.synthesize(cfg)
        rep = integrated_sense(y, cfg.detector, cfg.wavelet, cfg.router, cfg.welch)
        good += rep.path is SensingPath.WAVELET and rep.occupancy.statuses == want
    assert good >= 90


def test_zero_recording_reports_h0(tmp_path):
    from specsense.iqfile import encode
    from specsense.signals import SampleBuffer
    p = tmp_path / "zero.iq"
    p.write_bytes(encode(SampleBuffer([0j] * 8192, 1e6)))
    assert run(tmp_path, "sense", str(p), "--set", "channel.noise_variance=0.5") == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    verdict = report.get("decision", {}).get("hypothesis")
    statuses = {o["status"] for o in report.get("occupancy", [])}
    assert verdict == Hypothesis.H0_ABSENT.value or statuses == {"vacant"}


def test_truncated_recording_exit_1(tmp_path):
    assert run(tmp_path, "synth") == 0
    iq = tmp_path / "out" / "scene.iq"
    data = iq.read_bytes()
    iq.write_bytes(data[:-6])
    assert run(tmp_path, "sense", str(iq), out="s") == 1
    assert not (tmp_path / "s").exists()


def test_missing_recording_exit_1(tmp_path):
    assert run(tmp_path, "sense", str(tmp_path / "none.iq")) == 1
