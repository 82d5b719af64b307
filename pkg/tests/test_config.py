import pytest

from config.experiment_config import StructureParams, build_config, load_config
from core.errors import InputError


def test_hash_is_stable_and_ignores_runtime_settings():
    a = build_config({"scenario": "flat", "depth": 4})
    b = build_config({"depth": 4, "scenario": "flat", "workers": 8, "out": "elsewhere"})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != build_config({"scenario": "flat", "depth": 5}).config_hash()


def test_structure_parameters_are_validated():
    with pytest.raises(InputError) as info:
        build_config({"structure": {"K": 100.0}})
    assert ("structure", "K") in [tuple(loc) for loc in info.value.details["locations"]]
    with pytest.raises(InputError):
        build_config({"structure": {"tau": 0.25}})
    with pytest.raises(InputError):
        build_config({"structure": {"eta": 1.5}})
    assert StructureParams().tau == 2.0 ** -6


def test_unknown_keys_are_rejected():
    with pytest.raises(InputError):
        build_config({"depht": 3})


def test_set_kind_needs_its_parameters():
    with pytest.raises(InputError):
        build_config({"set": {"kind": "polygon"}})


def test_overrides_keep_unset_sections_unset():
    cfg = build_config({"depth": 3}).with_overrides(seed=5, workers=None)
    assert cfg.seed == 5
    assert cfg.model_fields_set == {"depth", "seed"}


def test_ini_sections_and_json_values(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[experiment]\nscenario = square\ndepth = 3\n\n[riesz]\neps = [0.25, 0.125]\n")
    cfg = load_config(str(path), use_env=False)
    assert cfg.scenario == "square"
    assert cfg.depth == 3
    assert cfg.riesz.eps == [0.25, 0.125]


def test_environment_overrides(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("CARLESON_EXPERIMENT__DEPTH", "5")
    monkeypatch.setenv("CARLESON_JN__ALPHA", "0.25")
    cfg = load_config(None)
    assert cfg.depth == 5
    assert cfg.jn.alpha == 0.25


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(InputError):
        load_config(str(tmp_path / "absent.ini"))
    bad = tmp_path / "bad.ini"
    bad.write_text("depth = 3\n")
    with pytest.raises(InputError):
        load_config(str(bad), use_env=False)
