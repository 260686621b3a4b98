import pytest

from emodistill.config import DEFAULTS, PipelineConfig
from emodistill.errors import ConfigError


def test_defaults_match_required_constants():
    cfg = PipelineConfig.default()
    assert cfg["sampling_perturb"]["set_size"] == 5
    assert cfg["sampling_perturb"]["n_long"] == 2
    assert cfg["sampling_perturb"]["n_short"] == 4
    assert cfg["sampling_perturb"]["long_sec"] == 3.0
    assert cfg["sampling_perturb"]["short_sec"] == 2.0
    assert cfg["acoustic"]["layers"] == 4
    assert cfg["acoustic"]["kernel"] == 9
    assert cfg["acoustic"]["cond_position"] == 3
    assert cfg["training"]["lr"] == 5e-4
    assert cfg["training"]["beta1"] == 0.9
    assert cfg["training"]["beta2"] == 0.98
    assert cfg["cluster_match"]["clusters"] == 5


def test_paper_preset_sizes():
    cfg = PipelineConfig.default()
    cfg.apply_preset("paper")
    assert cfg["acoustic"]["hidden"] == 256
    assert cfg["acoustic"]["filter_size"] == 1024


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[providers]\nn_speekers = 3\n")
    with pytest.raises(ConfigError, match="unknown key"):
        PipelineConfig.from_file(path)


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[providerz]\nn_speakers = 3\n")
    with pytest.raises(ConfigError, match="unknown section"):
        PipelineConfig.from_file(path)


def test_file_values_and_overrides(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text("[providers]\nn_speakers = 4\n\n[training]\nlr = 1e-3\n")
    cfg = PipelineConfig.from_file(path)
    assert cfg["providers"]["n_speakers"] == 4
    assert cfg["training"]["lr"] == 1e-3
    cfg.apply_overrides(["training.steps=42", "acoustic.conditioned=false"])
    assert cfg["training"]["steps"] == 42
    assert cfg["acoustic"]["conditioned"] is False


def test_bad_override_shapes():
    cfg = PipelineConfig.default()
    with pytest.raises(ConfigError):
        cfg.apply_overrides(["training.steps"])
    with pytest.raises(ConfigError):
        cfg.apply_overrides(["training.nope=1"])
    with pytest.raises(ConfigError):
        cfg.apply_overrides(["acoustic.conditioned=maybe"])


def test_hash_changes_with_values_and_roundtrips(tmp_path):
    a = PipelineConfig.default()
    b = PipelineConfig.default()
    assert a.hash() == b.hash()
    b.apply_overrides(["training.steps=9"])
    assert a.hash() != b.hash()
    path = tmp_path / "eff.toml"
    b.write(path)
    again = PipelineConfig.from_file(path)
    assert again.hash() == b.hash()


def test_every_default_section_present():
    assert set(DEFAULTS) == {
        "providers",
        "cluster_match",
        "sampling_perturb",
        "dino",
        "acoustic",
        "training",
    }
