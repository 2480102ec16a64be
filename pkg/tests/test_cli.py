import json
import shutil

import pytest

from colearn.cli import main
from colearn.errors import NumericalError
from colearn.pipeline import STAGES

from conftest import run_cli


def error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return json.loads(err[0])


def test_rca_on_two_by_two(two_by_two, tmp_path):
    out = tmp_path / "out"
    assert main(["rca", "--input-dir", str(two_by_two), "--out-dir", str(out)], environ={}) == 0
    assert (out / "rca_2000.csv").read_text() == "province,C27,D30\nAA,2,0\nBB,0,2\n"
    assert (out / "activity_2000.csv").read_text() == "province,C27,D30\nAA,1,0\nBB,0,1\n"
    manifest = json.loads((out / "manifest_rca.json").read_text())
    assert set(manifest["inputs"]) == {"firms.csv", "provinces.csv"}
    assert manifest["resolved"] == {"year": 2000}


def test_missing_input_is_exit_2_without_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["ingest", "--input-dir", str(tmp_path / "nowhere"), "--out-dir", str(out)], environ={})
    assert code == 2
    assert not out.exists()
    err = error_line(capsys)
    assert err["error"] == "input" and err["exit"] == 2 and "not found" in err["message"]


@pytest.mark.parametrize("argv", [["bogus"], ["rca", "--horizon", "x"], ["did", "--did-years", "2004"],
                                  ["rca", "--density", "nope"], []])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv, environ={}) == 1
    assert error_line(capsys)["error"] == "usage"


def test_help_exits_zero(capsys):
    assert main(["--help"], environ={}) == 0
    assert "synth" in capsys.readouterr().out


def test_numerical_failure_is_exit_3(monkeypatch, two_by_two, tmp_path, capsys):
    def fail(config, command):
        raise NumericalError("probit outcome has a single class")
    monkeypatch.setattr("colearn.cli.run_stages", fail)
    assert main(["probit", "--input-dir", str(two_by_two), "--out-dir", str(tmp_path / "o")], environ={}) == 3
    assert error_line(capsys) == {"error": "numerical", "exit": 3,
                                  "message": "probit outcome has a single class"}


def test_bad_config_value_is_input_error(two_by_two, tmp_path, capsys):
    assert main(["rca", "--input-dir", str(two_by_two), "--out-dir", str(tmp_path / "o"),
                 "--proximity", "sometimes"], environ={}) == 2
    assert "proximity" in error_line(capsys)["message"]


def test_environment_supplies_default_dirs(two_by_two, tmp_path):
    env = {"COLEARN_INPUT_DIR": str(two_by_two), "COLEARN_OUT_DIR": str(tmp_path / "env_out")}
    assert main(["rca"], environ=env) == 0
    assert (tmp_path / "env_out" / "rca_2000.csv").exists()


def test_idempotent_rerun(two_by_two, tmp_path):
    out = tmp_path / "out"
    argv = ["rca", "--input-dir", str(two_by_two), "--out-dir", str(out)]
    assert main(argv, environ={}) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert main(argv, environ={}) == 0
    assert {p.name: p.read_bytes() for p in out.iterdir()} == first


def test_manifest_alone_reexecutes_run(default_run):
    out = default_run / "out"
    assert run_cli(default_run, "did", "--config", "out/manifest_all.json", "--out-dir", "rerun") == 0
    rerun = json.loads((default_run / "rerun" / "manifest_did.json").read_text())
    original = json.loads((out / "manifest_all.json").read_text())
    assert rerun["inputs"] == {k: v for k, v in original["inputs"].items() if k in rerun["inputs"]}
    for name, digest in rerun["outputs"].items():
        assert original["outputs"][name] == digest


def test_synth_manifest_reexecutes(default_run):
    assert run_cli(default_run, "synth", "--config", "data/manifest_synth.json", "--out-dir", "again") == 0
    for name in ("firms.csv", "truth.json", "rail.csv"):
        assert (default_run / "again" / name).read_bytes() == (default_run / "data" / name).read_bytes()


def test_staged_chain_equals_all(default_run):
    chain = default_run / "chain"
    shutil.copytree(default_run / "data", chain)
    for stage in STAGES:
        assert run_cli(default_run, stage, "--input-dir", "chain", "--out-dir", "chain") == 0, stage
    all_out = default_run / "out"
    for path in sorted(all_out.iterdir()):
        if not path.name.startswith("manifest"):
            assert (chain / path.name).read_bytes() == path.read_bytes(), path.name


def test_scenario_overrides(tmp_path):
    (tmp_path / "scenario.json").write_text(json.dumps(
        {"provinces": 6, "grid": [2, 3], "industries": 10, "sectors": 3, "burn_in": 5}))
    assert run_cli(tmp_path, "synth", "--scenario", "scenario.json", "--seed", "2", "--out-dir", "s") == 0
    truth = json.loads((tmp_path / "s" / "truth.json").read_text())
    assert truth["config"]["seed"] == 2 and truth["config"]["provinces"] == 6
    (tmp_path / "bad.json").write_text(json.dumps({"provinces": 1}))
    assert run_cli(tmp_path, "synth", "--scenario", "bad.json", "--out-dir", "b") == 2


def test_figures_are_opt_in(tmp_path):
    (tmp_path / "scenario.json").write_text(json.dumps(
        {"provinces": 8, "grid": [2, 4], "industries": 12, "sectors": 3, "burn_in": 10}))
    assert run_cli(tmp_path, "synth", "--scenario", "scenario.json", "--out-dir", "d") == 0
    assert run_cli(tmp_path, "curves", "--input-dir", "d", "--out-dir", "plain") == 0
    assert not (tmp_path / "plain" / "figures").exists()
    assert run_cli(tmp_path, "curves", "--input-dir", "d", "--out-dir", "fig", "--figures") == 0
    pngs = sorted(p.name for p in (tmp_path / "fig" / "figures").iterdir())
    assert pngs and all(p.endswith(".png") for p in pngs)
    manifest = json.loads((tmp_path / "fig" / "manifest_curves.json").read_text())
    assert manifest["figures"] == [f"figures/{p}" for p in pngs]
    assert (tmp_path / "fig" / "curve_related.csv").read_bytes() == \
        (tmp_path / "plain" / "curve_related.csv").read_bytes()
