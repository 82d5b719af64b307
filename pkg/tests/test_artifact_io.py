import numpy as np
import pytest

from core.errors import InputError
from tools.artifact_io import collect_reports, plain, read_json, report_diff, write_csv, write_json

PROVENANCE = {"config_hash": "abc", "geometry_hash": "def", "seed": 7}


def test_plain_converts_numpy_values():
    out = plain({"a": np.float64(0.5), "b": np.arange(2), "c": (np.bool_(True), float("nan")), 3: np.int64(4)})
    assert out == {"a": 0.5, "b": [0, 1], "c": [True, "nan"], "3": 4}


def test_csv_puts_provenance_first(tmp_path):
    path = write_csv(tmp_path / "t" / "rows.csv", [{"z": 1, "a": 0.1}, {"a": [1, 2]}], PROVENANCE)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "config_hash,geometry_hash,seed,a,z"
    assert lines[1] == "abc,def,7,0.1,1"
    assert lines[2] == 'abc,def,7,"[1, 2]",'


def test_json_round_trip(tmp_path):
    path = write_json(tmp_path / "report.json", {"scalars": {"x": np.float32(1.5)}, "verdicts": {"ok": True}})
    assert read_json(path) == {"scalars": {"x": 1.5}, "verdicts": {"ok": True}}


def test_missing_and_malformed_reports(tmp_path):
    with pytest.raises(InputError):
        read_json(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(InputError):
        read_json(bad)


def test_diff_lists_flipped_verdicts():
    old = {"config_hash": "h", "scalars": {"x": 1.0, "y": "nan"}, "verdicts": {"a": True, "b": False}}
    new = {"config_hash": "h", "scalars": {"x": 1.0 + 1e-12, "y": "nan"}, "verdicts": {"a": False, "b": True}}
    diff = report_diff(old, new, rtol=1e-9)
    assert diff["same_config"]
    assert diff["regressions"] == ["verdicts.a"]
    assert sorted(c["key"] for c in diff["changed"]) == ["verdicts.a", "verdicts.b"]
    assert report_diff(old, old)["identical"]


def test_scalar_drift_is_a_change_but_not_a_regression():
    old = {"scalars": {"x": 1.0}, "verdicts": {"a": True}}
    new = {"scalars": {"x": 2.0}, "verdicts": {"a": True}}
    diff = report_diff(old, new, rtol=0.1)
    assert [c["key"] for c in diff["changed"]] == ["scalars.x"]
    assert diff["regressions"] == []
    assert report_diff(old, new, rtol=0.6)["identical"]


def test_collect_reports_skips_missing(tmp_path):
    write_json(tmp_path / "jn" / "report.json", {"scalars": {}})
    found = collect_reports(tmp_path, ["jn", "riesz"])
    assert list(found) == ["jn"]
