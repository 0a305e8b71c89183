"""Command-line front end.

    specsense <subcommand> [--config PATH] [--seed U64] [--out DIR] [--set key=value ...]

Subcommands: ``snr-sweep``, ``roc``, ``fading``, ``edges``, ``calibrate``,
``synth``, ``sense IQFILE``. Each writes one CSV per curve plus a
``.meta.json`` sidecar holding the fully resolved configuration, which
is enough to reproduce the run bit for bit.

Exit status: 0 success, 1 invalid configuration or input file, 2 I/O
failure, 3 calibration rows outside their confidence band.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import harness
from .config import ConfigError, RunConfig, load_config
from .integrate import SensingError, SensingPath, integrated_sense
from .iqfile import IqFormatError, encode, read_iq
from .rng import Rng
from .signals import ChannelSpec, apply_channel, gen_narrowband, gen_wideband
from .wavelet import detect_edges

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CALIBRATION = 0, 1, 2, 3


class OutputError(OSError):
    pass


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_bytes(header: Sequence[str], rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue().encode("utf-8")


def _parse_cell(text: str):
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    if text in ("true", "false"):
        return text == "true"
    return text


def read_csv(path) -> tuple:
    """``(header, rows)`` with numbers parsed back to int/float."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_parse_cell(c) for c in row] for row in reader]
    return header, rows


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n").encode("utf-8")


def write_outputs(out_dir: Path, files: dict) -> list:
    """Write every file or none: stage to temporaries, then rename."""
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out_dir}: {exc}") from exc
    staged = []
    try:
        for name, data in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".tmp-")
            staged.append((tmp, out_dir / name))
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
        for tmp, final in staged:
            os.replace(tmp, final)
    except OSError as exc:
        for tmp, _ in staged:
            try:
                os.unlink(tmp)
            except OSError:
                pass
        raise OutputError(f"cannot write outputs in {out_dir}: {exc}") from exc
    return [str(out_dir / name) for name in files]


def _meta(cfg: RunConfig, command: str, outputs: Sequence[str], **extra) -> bytes:
    return _json_bytes({"command": command, "master_seed": cfg.master_seed, "config": cfg.raw,
                        "outputs": list(outputs), **extra})


def _pd_rows(estimates):
    return [(e.snr_db, e.pd_hat, e.ci_halfwidth, e.trials) for e in estimates]


PD_HEADER = ("snr_db", "pd_hat", "ci", "trials")


def cmd_snr_sweep(cfg: RunConfig) -> tuple:
    h = cfg.harness
    est = harness.run_pd_vs_snr(h.snr_grid_db, cfg.detector, cfg.channel, h.trials, Rng(cfg.master_seed),
                                cfg.tone_hz, h.workers)
    return {"pd_vs_snr.csv": csv_bytes(PD_HEADER, _pd_rows(est))}, EXIT_OK


def cmd_roc(cfg: RunConfig) -> tuple:
    h = cfg.harness
    rng = Rng(cfg.master_seed)
    files = {}
    for name, snr in (("roc.csv", h.roc_snr_db), ("roc_noise_only.csv", -math.inf)):
        curve = harness.run_roc(h.pfa_grid, snr, cfg.detector, cfg.channel, h.trials, rng,
                                cfg.tone_hz, h.workers)
        files[name] = csv_bytes(
            ("pfa_target", "pfa_empirical", "pfa_ci", "pd_hat", "pd_ci", "trials"),
            [(p.pfa_target, p.pfa_empirical, p.pfa_ci, p.pd_hat, p.pd_ci, p.trials) for p in curve.points],
        )
    return files, EXIT_OK


def cmd_fading(cfg: RunConfig) -> tuple:
    h = cfg.harness
    cmp = harness.run_fading_comparison(cfg.detector, h.fading_snr_grid_db, h.trials, Rng(cfg.master_seed),
                                        cfg.channel, h.fading_taps, cfg.tone_hz, h.workers)
    return {"pd_awgn.csv": csv_bytes(PD_HEADER, _pd_rows(cmp.awgn)),
            "pd_rayleigh.csv": csv_bytes(PD_HEADER, _pd_rows(cmp.rayleigh))}, EXIT_OK


def cmd_calibrate(cfg: RunConfig) -> tuple:
    h = cfg.harness
    rows = harness.run_cfar_calibration(h.calibration_n_grid, h.calibration_pfa_grid, h.calibration_trials,
                                        Rng(cfg.master_seed), cfg.channel.noise_variance, h.workers)
    data = csv_bytes(("n", "pfa_target", "pfa_empirical", "ci", "trials", "passed"),
                     [(r.n, r.pfa_target, r.pfa_empirical, r.ci, r.trials, r.passed) for r in rows])
    status = EXIT_OK if all(r.passed for r in rows) else EXIT_CALIBRATION
    return {"cfar_calibration.csv": data}, status


def cmd_edges(cfg: RunConfig) -> tuple:
    if cfg.scene.plan is None:
        raise ConfigError("scene.bands", "the edges demo needs a subband plan")
    demo = harness.run_multiscale_demo(cfg.scene.plan, cfg.welch, cfg.wavelet, Rng(cfg.master_seed).child("edges"),
                                       cfg.scene.n_samples, cfg.channel.noise_variance)
    cols = demo.columns()
    edges = detect_edges(demo.product, demo.psd, cfg.wavelet)
    return {
        "multiscale.csv": csv_bytes(tuple(cols), zip(*cols.values())),
        "edges.csv": csv_bytes(("edge_hz", "position_bin", "magnitude"),
                               zip(edges.frequencies_hz, edges.positions, edges.magnitudes)),
    }, EXIT_OK


def synthesize(cfg: RunConfig):
    """The configured scene through the configured channel, plus its ground truth."""
    s = cfg.scene
    rng = Rng(cfg.master_seed).child("synth")
    if s.kind == "tone":
        x = gen_narrowband(s.tone_hz, s.n_samples, 1.0, s.sample_rate_hz, rng.child("signal"))
        ch = ChannelSpec(cfg.channel.noise_variance, s.snr_db, cfg.channel.taps, cfg.channel.fading)
        truth = {"kind": "tone", "tone_hz": s.tone_hz, "snr_db": s.snr_db, "hypothesis": "H1"}
    else:
        x = gen_wideband(s.plan, s.n_samples, rng.child("signal"))
        ch = ChannelSpec(cfg.channel.noise_variance, None, cfg.channel.taps, cfg.channel.fading)
        truth = {
            "kind": "plan",
            "occupancy": [{"f_start_hz": a, "f_stop_hz": b, "status": "occupied" if occ else "vacant"}
                          for a, b, occ in s.plan.occupancy()],
            "bands": [[b.f_start_hz, b.f_stop_hz, b.power_level] for b in s.plan.bands],
        }
    y = apply_channel(x, ch, rng.child("channel"))
    truth.update({"master_seed": cfg.master_seed, "noise_variance": cfg.channel.noise_variance,
                  "n_samples": s.n_samples, "sample_rate_hz": s.sample_rate_hz,
                  "fading": cfg.channel.fading.value, "taps": [list(t) for t in cfg.channel.taps]})
    return y, truth


def cmd_synth(cfg: RunConfig, iq_name: str = "scene.iq") -> tuple:
    y, truth = synthesize(cfg)
    stem = Path(iq_name).stem
    return {iq_name: encode(y), f"{stem}.truth.json": _json_bytes(truth)}, EXIT_OK


def report_dict(report) -> dict:
    out = {
        "path": report.path.value,
        "signal_class": report.signal_class.kind.value,
        "occupied_bandwidth_hz": report.signal_class.occupied_bandwidth_hz,
        "occupied_fraction": report.signal_class.occupied_fraction,
        "psd_bins": report.psd.n_bins,
        "psd_segments": report.psd.n_segments_averaged,
    }
    if report.path is SensingPath.ENERGY:
        d = report.decision
        out["decision"] = {"hypothesis": d.hypothesis.value, "statistic": d.statistic, "threshold": d.threshold}
        out["band_hz"] = [list(b) for b in report.band_hz]
    else:
        out["occupancy"] = [{"f_start_hz": b.f_start_hz, "f_stop_hz": b.f_stop_hz, "status": b.status.value,
                             "mean_psd_level": b.mean_psd_level} for b in report.occupancy.subbands]
        out["edges_hz"] = list(report.edges.frequencies_hz)
    return out


def cmd_sense(cfg: RunConfig, iq_path: str) -> tuple:
    try:
        rec = read_iq(iq_path)
    except OSError as exc:
        raise ConfigError("recording", f"cannot read {iq_path}: {exc.strerror or exc}") from exc
    buffer = rec.to_buffer()
    report = integrated_sense(buffer, cfg.detector, cfg.wavelet, cfg.router, cfg.welch)
    body = report_dict(report)
    body["recording"] = str(iq_path)
    psd = report.psd
    return {
        "report.json": _json_bytes(body),
        "psd.csv": csv_bytes(("bin", "freq_hz", "psd"), zip(range(psd.n_bins), psd.frequencies, psd.values)),
    }, EXIT_OK


COMMANDS = {
    "snr-sweep": ("Pd vs SNR for the energy detector", "pd_vs_snr"),
    "roc": ("Pd vs Pfa at a fixed SNR, plus a noise-only control", "roc"),
    "fading": ("Pd vs SNR under AWGN and block Rayleigh fading", "fading"),
    "edges": ("multiscale wavelet product curves for the scene plan", "multiscale"),
    "calibrate": ("empirical CFAR false-alarm sweep", "cfar_calibration"),
    "synth": ("write an IQ recording of the configured scene", "scene"),
    "sense": ("run integrated sensing on an IQ recording", "report"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specsense", description="Integrated spectrum sensing simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (help_text, _) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML run configuration (defaults are shipped)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key, e.g. harness.trials=2000")
        if name == "sense":
            p.add_argument("iq_file", help="recording written by 'specsense synth' or any cf32le source")
        if name == "synth":
            p.add_argument("--iq-name", default="scene.iq", help="file name of the recording inside --out")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        cfg = load_config(args.config, tuple(args.overrides), args.seed, args.out)
        if args.command == "sense":
            files, status = cmd_sense(cfg, args.iq_file)
        elif args.command == "synth":
            files, status = cmd_synth(cfg, args.iq_name)
        else:
            handler = {"snr-sweep": cmd_snr_sweep, "roc": cmd_roc, "fading": cmd_fading,
                       "edges": cmd_edges, "calibrate": cmd_calibrate}[args.command]
            files, status = handler(cfg)
    except (ConfigError, IqFormatError, SensingError) as exc:
        print(f"specsense: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    stem = COMMANDS[args.command][1]
    meta_name = f"{stem}.meta.json"
    files[meta_name] = _meta(cfg, args.command, list(files))
    try:
        written = write_outputs(Path(cfg.output_dir), files)
    except OutputError as exc:
        print(f"specsense: error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(path)
    if status == EXIT_CALIBRATION:
        print("specsense: calibration rows outside their confidence band", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
