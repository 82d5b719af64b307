import json

import numpy as np
import pytest

from config.experiment_config import build_config
from core.errors import InputError
from core.estimators import interior_samples
from core.experiment_orchestrator import ExperimentOrchestrator, whitney_depth
from core.regions import ComplementDomain
from main import EXIT_OK, EXIT_VERDICT, main

RIESZ_INI = """[experiment]
scenario = flat

[riesz]
spacing = 0.0078125
eps = [0.25, 0.125]
ensemble = 2
iterations = 5
"""


@pytest.fixture
def riesz_ini(tmp_path):
    path = tmp_path / "riesz.ini"
    path.write_text(RIESZ_INI)
    return str(path)


def test_whitney_depth_margin():
    assert whitney_depth(3, 2.0 ** -8) == 5
    assert whitney_depth(3, 2.0 ** -4) == 4


def test_build_geometry_then_report(tmp_path):
    out = tmp_path / "out"
    orchestrator = ExperimentOrchestrator(build_config({"scenario": "flat", "depth": 3, "out": str(out)}))
    report = orchestrator.run("build-geometry")
    assert report.verdicts["grid_nesting"]
    assert report.verdicts["whitney_display"]
    assert report.scalars["adr_upper"] == pytest.approx(2.0)
    assert report.scalars["k_max"] == 3
    folder = out / "build-geometry"
    for name in ("grid.csv", "whitney.csv", "report.json", "runtime.json"):
        assert (folder / name).exists()
    assert (folder / "grid.csv").read_text().startswith("config_hash,geometry_hash,seed,")

    summary = orchestrator.run("report")
    assert set(summary.verdicts) == {"build-geometry"}
    assert summary.verdicts["build-geometry"] == report.passed
    assert summary.details["stale"] == []


def test_report_without_runs(tmp_path):
    orchestrator = ExperimentOrchestrator(build_config({"out": str(tmp_path)}))
    with pytest.raises(InputError):
        orchestrator.run("report")
    with pytest.raises(InputError):
        orchestrator.run("plot")


def test_riesz_artifacts_do_not_depend_on_workers(tmp_path, riesz_ini):
    one, two = tmp_path / "one", tmp_path / "two"
    assert main(["riesz", "--config", riesz_ini, "--out", str(one)]) == 0
    assert main(["riesz", "--config", riesz_ini, "--out", str(two), "--workers", "2"]) == 0
    for name in ("norms.csv", "report.json"):
        assert (one / "riesz" / name).read_bytes() == (two / "riesz" / name).read_bytes()
    report = json.loads((one / "riesz" / "report.json").read_text())
    assert report["scalars"]["samples"] == 256
    assert main(["--diff", str(one / "riesz" / "report.json"), str(two / "riesz" / "report.json")]) == 0


def test_list_scenarios():
    assert main(["--list-scenarios"]) == 0


def test_malformed_config_exits_with_input_status(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("depth = 3\n")
    assert main(["build-geometry", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert (tmp_path / ".toolkit" / "error_log.json").exists()


def test_invalid_structure_parameter(tmp_path):
    ini = tmp_path / "k.ini"
    ini.write_text("[structure]\nK = 100\n")
    assert main(["decompose", "--config", str(ini), "--out", str(tmp_path)]) == 2


def test_missing_subcommand(tmp_path):
    assert main(["--out", str(tmp_path)]) == 2


def test_unsatisfiable_jn_hypothesis(tmp_path):
    ini = tmp_path / "jn.ini"
    ini.write_text("[experiment]\nscenario = flat\nquadrature_level = 0\n\n[jn]\nn_cap = 1e-9\nensemble = 0\n")
    assert main(["jn", "--config", str(ini), "--out", str(tmp_path / "out"), "--depth", "3"]) == 2


REDUCED_INI = """[experiment]
scenario = flat
depth = 2
quadrature_level = 0

[estimate]
ball_levels = 2
ball_centers = 3
interior_samples = 9
polar_nodes = 16

[jn]
ensemble = 1
t_points = 8

[good_lambda]
eps = [0.5]
gamma = [0.125, 0.5]
q = [2.0]

[ns]
q = 2
all_q = true
"""


@pytest.fixture
def reduced_ini(tmp_path):
    path = tmp_path / "reduced.ini"
    path.write_text(REDUCED_INI)
    return str(path)


@pytest.mark.parametrize("command", ["decompose", "corona", "estimate", "jn", "good-lambda", "ns", "transference"])
def test_geometry_commands_run_at_reduced_depth(tmp_path, reduced_ini, command):
    out = tmp_path / "out"
    assert main([command, "--config", reduced_ini, "--out", str(out)]) in (EXIT_OK, EXIT_VERDICT)
    report = json.loads((out / command / "report.json").read_text())
    assert report["command"] == command
    assert report["scalars"]
    assert report["tables"]
    for table in report["tables"]:
        assert (out / command / f"{table}.csv").exists()


def test_ns_at_q_two_needs_all_q(tmp_path):
    ini = tmp_path / "ns.ini"
    ini.write_text("[experiment]\nscenario = flat\ndepth = 2\nquadrature_level = 0\n\n[ns]\nq = 2\n")
    assert main(["ns", "--config", str(ini), "--out", str(tmp_path / "out")]) == 2


def test_decompose_artifacts_do_not_depend_on_workers(tmp_path, reduced_ini):
    one, two = tmp_path / "one", tmp_path / "two"
    assert main(["decompose", "--config", reduced_ini, "--out", str(one)]) in (EXIT_OK, EXIT_VERDICT)
    assert main(["decompose", "--config", reduced_ini, "--out", str(two), "--workers", "2"]) in (EXIT_OK, EXIT_VERDICT)
    for name in ("containments.csv", "structure.csv", "report.json"):
        assert (one / "decompose" / name).read_bytes() == (two / "decompose" / name).read_bytes()


def test_estimate_of_the_height_over_the_flat_line(tmp_path):
    config = build_config({"scenario": "flat", "depth": 2, "quadrature_level": 0, "out": str(tmp_path),
                           "estimate": {"ball_levels": 2, "ball_centers": 3, "interior_samples": 9}})
    orchestrator = ExperimentOrchestrator(config)
    report = orchestrator.run("estimate")
    p = orchestrator.build_pipeline()
    X = interior_samples(ComplementDomain(p.set, "plus"), p.W.window.lo, p.W.window.hi, 9)
    top = float(X[:, 1].max())
    # u = y: |grad u| = 1 and delta = y on the upper half-plane
    assert report.scalars["cme0"] == pytest.approx(np.pi / 4.0 * top ** 2, rel=1e-2)
    assert report.scalars["cme"] == pytest.approx(2.0 / 3.0 * max(1.0, 1.5 * top) ** 2, rel=2e-2)
    rows = {row["name"]: row["value"] for row in report.tables["functionals"]}
    r = config.estimate.r
    assert rows["square_function"] == pytest.approx(r * np.sqrt(np.pi / 3.0), rel=2e-2)
    assert rows["area_integral"] == pytest.approx(rows["square_function"])
    assert rows["ntmax"] == pytest.approx(r, rel=1e-2)
