import json
import math

import pytest

from impuritybound.cli import main


def test_usage_error_exit_code(capsys):
    assert main(["lambda", "--m", "-1"]) == 2
    assert "positive" in capsys.readouterr().err


def test_unknown_subcommand_exits():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_spectrum_output_schema(capsys, tmp_path):
    code = main(["spectrum", "--lbig", str(math.pi), "--count", "12",
                 "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert [lv["multiplicity"] for lv in doc["levels"][:5]] == [1, 3, 3, 3, 1]
    assert (tmp_path / "spectrum.json").exists()
    manifest = json.loads((tmp_path / "spectrum_manifest.json").read_text())
    assert manifest["command"] == "spectrum"
    assert manifest["version"]


def test_spectrum_roundtrip_serialization(capsys):
    main(["spectrum", "--lbig", "1.7", "--count", "4"])
    doc = json.loads(capsys.readouterr().out)
    assert doc["levels"][0]["value"] == 3.0 * math.pi**2 / 1.7**2


def test_bound_command_matches_library(capsys, registry):
    code = main(["bound", "--m", "1", "--n", "1000", "--ell", "1",
                 "--alpha", "-1", "--lambda-val", "0.3409",
                 "--kappa", "1.0"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    from impuritybound.bounds import bound_confined
    rep = bound_confined(1.0, 1.0, 1000, 1.0, -1.0, registry,
                         lambda_val=0.3409)
    assert doc["value"] == rep.value
    assert doc["registry_hash"] == registry.content_hash()


def test_bound_precondition_exit_code(capsys):
    # kappa above c_T fails the stability precondition
    code = main(["bound", "--m", "1", "--n", "1000", "--ell", "1",
                 "--alpha", "-1", "--lambda-val", "0.3409",
                 "--kappa", "100.0"])
    assert code == 3


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("lbig = 2.0\ncount = 3  # comment\n")
    main(["spectrum", "--config", str(cfg), "--count", "5"])
    doc = json.loads(capsys.readouterr().out)
    assert doc["lbig"] == 2.0      # from config
    assert doc["count"] == 5       # flag wins


def test_config_unknown_key_rejected(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("warp_factor = 9\n")
    assert main(["spectrum", "--config", str(cfg)]) == 2
    assert "warp_factor" in capsys.readouterr().err


def test_ltcheck_runs_small(capsys, tmp_path):
    code = main(["ltcheck", "--count", "2", "--n", "4", "--basis", "64",
                 "--grid", "32", "--lbig", "2.0", "--mu", "9.0",
                 "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["all_squared_trace_ok"] is True
    assert len(doc["results"]) == 2
