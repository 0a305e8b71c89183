"""Run configuration: TOML loading, ``--set`` overrides, validation.

The file mirrors the module configs section by section (see
``default.toml``). User files are merged over the shipped defaults;
any key not present in the defaults is an error, and every section is
validated by building the real config objects before anything runs.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .energy import DetectorConfig
from .integrate import RouterConfig, WelchConfig
from .signals import ChannelSpec, SubbandPlan
from .wavelet import WaveletConfig


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def default_config() -> dict:
    text = resources.files("specsense").joinpath("default.toml").read_text(encoding="utf-8")
    return tomllib.loads(text)


def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(path, "unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(path, "expected a section")
            out[key] = _merge(base[key], value, path + ".")
        else:
            if isinstance(value, dict):
                raise ConfigError(path, "expected a value, got a section")
            out[key] = value
    return out


def parse_override(item: str) -> tuple:
    """``"a.b=value"`` -> ``(["a", "b"], value)``; values use TOML syntax, bare words are strings."""
    if "=" not in item:
        raise ConfigError(item, "override must look like section.key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key.split("."), value


def _apply_override(cfg: dict, parts: list, value: Any) -> None:
    node = cfg
    for i, part in enumerate(parts[:-1]):
        if not isinstance(node.get(part), dict):
            raise ConfigError(".".join(parts[: i + 1]), "unknown section")
        node = node[part]
    if parts[-1] not in node or isinstance(node[parts[-1]], dict):
        raise ConfigError(".".join(parts), "unknown key")
    node[parts[-1]] = value


def load_config(path: Optional[str], overrides: tuple = (), seed: Optional[int] = None,
                out: Optional[str] = None) -> "RunConfig":
    """Defaults <- config file <- ``--set`` overrides <- ``--seed`` / ``--out``."""
    cfg = default_config()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror or exc}") from exc
        try:
            user = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config", f"{path} is not valid TOML: {exc}") from exc
        cfg = _merge(cfg, user)
    for item in overrides:
        parts, value = parse_override(item)
        _apply_override(cfg, parts, value)
    if seed is not None:
        cfg["master_seed"] = seed
    if out is not None:
        cfg["output_dir"] = out
    return RunConfig.from_dict(cfg)


def _typed(section: dict, key: str, kind, prefix: str):
    value = section[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{prefix}.{key}", f"expected {kind.__name__}, got {value!r}")
    return value


def _float_list(section: dict, key: str, prefix: str, allow_empty: bool = False) -> tuple:
    value = section[key]
    if not isinstance(value, list) or (not value and not allow_empty):
        raise ConfigError(f"{prefix}.{key}", "expected a nonempty list of numbers")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix}.{key}", "expected numbers") from exc


def _build(key: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(key, str(exc)) from exc


@dataclass(frozen=True)
class HarnessSettings:
    trials: int
    workers: int
    snr_grid_db: tuple
    pfa_grid: tuple
    roc_snr_db: float
    fading_snr_grid_db: tuple
    fading_taps: tuple
    calibration_n_grid: tuple
    calibration_pfa_grid: tuple
    calibration_trials: int


@dataclass(frozen=True)
class SceneSettings:
    kind: str
    n_samples: int
    sample_rate_hz: float
    tone_hz: float
    snr_db: float
    plan: Optional[SubbandPlan]


@dataclass(frozen=True)
class RunConfig:
    master_seed: int
    output_dir: str
    channel: ChannelSpec
    detector: DetectorConfig
    tone_hz: float
    welch: WelchConfig
    wavelet: WaveletConfig
    router: RouterConfig
    harness: HarnessSettings
    scene: SceneSettings
    raw: dict

    @classmethod
    def from_dict(cls, cfg: dict) -> "RunConfig":
        seed = cfg["master_seed"]
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError("master_seed", "expected an unsigned 64-bit integer")
        out_dir = cfg["output_dir"]
        if not isinstance(out_dir, str) or not out_dir:
            raise ConfigError("output_dir", "expected a nonempty path")

        c = cfg["channel"]
        nv = _typed(c, "noise_variance", float, "channel")
        taps = c["taps"]
        if not isinstance(taps, list) or not all(isinstance(t, list) and len(t) == 2 for t in taps):
            raise ConfigError("channel.taps", "expected a list of [delay, power] pairs")
        channel = _build("channel", ChannelSpec, noise_variance=nv, taps=tuple(tuple(t) for t in taps),
                         fading=_typed(c, "fading", str, "channel"))

        d = cfg["detector"]
        fs = _typed(d, "sample_rate_hz", float, "detector")
        detector = _build("detector", DetectorConfig, _typed(d, "n_samples", int, "detector"), nv,
                          _typed(d, "target_pfa", float, "detector"), sample_rate_hz=fs)
        tone_hz = _typed(d, "tone_hz", float, "detector")
        if not abs(tone_hz) < fs / 2:
            raise ConfigError("detector.tone_hz", "must lie inside the Nyquist band")

        w = cfg["welch"]
        welch = _build("welch", WelchConfig, _typed(w, "window", str, "welch"),
                       _typed(w, "length", int, "welch"), _typed(w, "overlap_fraction", float, "welch"),
                       _typed(w, "min_segments", int, "welch"))
        if welch.length & (welch.length - 1):
            raise ConfigError("welch.length", "must be a power of two")
        wv = cfg["wavelet"]
        wavelet = _build("wavelet", WaveletConfig, _typed(wv, "n_scales", int, "wavelet"),
                         _typed(wv, "edge_threshold_fraction", float, "wavelet"))
        r = cfg["router"]
        router = _build("router", RouterConfig, _typed(r, "power_fraction", float, "router"),
                        _typed(r, "narrowband_fraction_threshold", float, "router"),
                        _typed(r, "subtract_noise_floor", bool, "router"),
                        _typed(r, "occupancy_factor", float, "router"))

        h = cfg["harness"]
        trials = _typed(h, "trials", int, "harness")
        if trials < 100:
            raise ConfigError("harness.trials", "need at least 100")
        workers = _typed(h, "workers", int, "harness")
        if workers < 1:
            raise ConfigError("harness.workers", "must be >= 1")
        ftaps = h["fading_taps"]
        if not isinstance(ftaps, list) or not all(isinstance(t, list) and len(t) == 2 for t in ftaps):
            raise ConfigError("harness.fading_taps", "expected a list of [delay, power] pairs")
        _build("harness.fading_taps", ChannelSpec, noise_variance=nv, taps=tuple(tuple(t) for t in ftaps),
               fading="rayleigh_block")
        pfa_grid = _float_list(h, "pfa_grid", "harness")
        if any(not 0 < p < 1 for p in pfa_grid) or any(b <= a for a, b in zip(pfa_grid, pfa_grid[1:])):
            raise ConfigError("harness.pfa_grid", "must be strictly increasing inside (0, 1)")
        cal_pfa = _float_list(h, "calibration_pfa_grid", "harness")
        if any(not 0 < p < 1 for p in cal_pfa):
            raise ConfigError("harness.calibration_pfa_grid", "values must be in (0, 1)")
        n_grid = h["calibration_n_grid"]
        if not isinstance(n_grid, list) or not n_grid or not all(isinstance(n, int) and n >= 1 for n in n_grid):
            raise ConfigError("harness.calibration_n_grid", "expected a nonempty list of positive integers")
        cal_trials = _typed(h, "calibration_trials", int, "harness")
        if cal_trials < 10_000:
            raise ConfigError("harness.calibration_trials", "need at least 10000")
        harness = HarnessSettings(
            trials, workers, _float_list(h, "snr_grid_db", "harness"), pfa_grid,
            _typed(h, "roc_snr_db", float, "harness"), _float_list(h, "fading_snr_grid_db", "harness"),
            tuple(tuple(t) for t in ftaps), tuple(n_grid), cal_pfa, cal_trials,
        )

        s = cfg["scene"]
        kind = _typed(s, "kind", str, "scene")
        if kind not in ("tone", "plan"):
            raise ConfigError("scene.kind", "expected 'tone' or 'plan'")
        n = _typed(s, "n_samples", int, "scene")
        if n < 1:
            raise ConfigError("scene.n_samples", "must be >= 1")
        sfs = _typed(s, "sample_rate_hz", float, "scene")
        if not sfs > 0:
            raise ConfigError("scene.sample_rate_hz", "must be positive")
        stone = _typed(s, "tone_hz", float, "scene")
        if kind == "tone" and not abs(stone) < sfs / 2:
            raise ConfigError("scene.tone_hz", "must lie inside the Nyquist band")
        ssnr = _typed(s, "snr_db", float, "scene")
        if not math.isfinite(ssnr):
            raise ConfigError("scene.snr_db", "must be finite")
        bands = s["bands"]
        if not isinstance(bands, list) or not all(isinstance(b, list) and len(b) == 2 for b in bands):
            raise ConfigError("scene.bands", "expected a list of [width_fraction, power_level] pairs")
        plan = _build("scene.bands", SubbandPlan.from_fractions, [tuple(b) for b in bands], sfs) if bands else None
        if kind == "plan" and plan is None:
            raise ConfigError("scene.bands", "plan scenes need at least one band")
        if kind == "plan" and n < 64:
            raise ConfigError("scene.n_samples", "plan scenes need at least 64 samples")
        scene = SceneSettings(kind, n, sfs, stone, ssnr, plan)

        return cls(seed, out_dir, channel, detector, tone_hz, welch, wavelet, router, harness, scene,
                   copy.deepcopy(cfg))
