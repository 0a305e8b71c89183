import pytest

from specsense.config import ConfigError, default_config, load_config, parse_override


def test_defaults_validate():
    cfg = load_config(None)
    assert cfg.detector.n_samples == 1024 and cfg.detector.noise_variance == cfg.channel.noise_variance
    assert cfg.harness.calibration_n_grid == (1, 16, 256, 1024)
    assert cfg.scene.plan.occupied_fraction() == 0.75
    assert cfg.raw == default_config()


def test_file_then_overrides_then_flags(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("master_seed = 5\n[harness]\ntrials = 500\nworkers = 2\n")
    cfg = load_config(str(p), ("harness.trials=700",), seed=9, out="o")
    assert (cfg.master_seed, cfg.harness.trials, cfg.harness.workers, cfg.output_dir) == (9, 700, 2, "o")
    assert cfg.raw["harness"]["trials"] == 700


def test_parse_override():
    assert parse_override("a.b=3") == (["a", "b"], 3)
    assert parse_override("welch.window=hann") == (["welch", "window"], "hann")
    assert parse_override("h.g=[1, 2.5]") == (["h", "g"], [1, 2.5])
    with pytest.raises(ConfigError):
        parse_override("nothing")


@pytest.mark.parametrize("text,key", [
    ("foo = 1\n", "foo"),
    ("[detector]\nbogus = 1\n", "detector.bogus"),
    ("[detector]\ntarget_pfa = 1.5\n", "detector"),
    ("[detector]\nn_samples = \"many\"\n", "detector.n_samples"),
    ("[welch]\nlength = 1000\n", "welch.length"),
    ("[channel]\ntaps = [[0, 0.7]]\n", "channel"),
    ("[harness]\npfa_grid = [0.5, 0.1]\n", "harness.pfa_grid"),
    ("[scene]\nkind = \"noise\"\n", "scene.kind"),
    ("[wavelet]\nn_scales = 12\n", "wavelet"),
    ("master_seed = -1\n", "master_seed"),
    ("this is not toml", "config"),
])
def test_invalid_configs_name_the_key(tmp_path, text, key):
    p = tmp_path / "bad.toml"
    p.write_text(text)
    with pytest.raises(ConfigError) as err:
        load_config(str(p))
    assert err.value.key == key


def test_missing_file():
    with pytest.raises(ConfigError) as err:
        load_config("/nonexistent/run.toml")
    assert err.value.key == "config"


def test_unknown_override_section():
    with pytest.raises(ConfigError):
        load_config(None, ("nosuch.key=1",))
    with pytest.raises(ConfigError):
        load_config(None, ("harness=1",))
