import csv
import json

import pytest

import dipolar_mqc.validation as validation
from dipolar_mqc import __version__
from dipolar_mqc.cli import build_parser, main

SMALL = {
    "interaction": {"mode": "near-electrostatic", "modes": ["near-electrostatic", "off"],
                    "order_max": 2, "n_atoms": 2},
    "spectrum": {"n_grid": 200},
    "output": {"formats": ["csv", "json", "svg"], "prefix": "t_"},
}


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return p


def _rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.reader(lines))


def test_parser_flags():
    args = build_parser().parse_args(
        ["spectrum", "--preset", "fig2", "--out", "x", "--format", "csv", "--format", "svg",
         "--seed", "4", "--threads", "2"])
    assert args.command == "spectrum" and args.preset == "fig2"
    assert args.format == ["csv", "svg"] and args.seed == 4 and args.threads == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_preset_rejected_by_parser(capsys):
    with pytest.raises(SystemExit) as e:
        main(["estimate", "--preset", "nope"])
    assert e.value.code == 2


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"oracle": {"scaling_trials": 64}}))
    assert main(["estimate", "--config", str(p), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "oracle/scaling_trials" in err and str(p) in err


def test_malformed_json_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"seed": 1,,}')
    assert main(["estimate", "--config", str(p)]) == 2
    assert "line 1 column" in capsys.readouterr().err


def test_unwritable_output_exit_code(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["estimate", "--preset", "tableII", "--out", str(blocker / "sub")]) == 3
    assert "output error" in capsys.readouterr().err


def test_estimate(tmp_path, capsys):
    assert main(["estimate", "--preset", "tableII", "--out", str(tmp_path), "--format", "csv",
                 "--format", "json"]) == 0
    est = json.loads((tmp_path / "tableII_estimate.json").read_text())
    assert est["provenance"]["command"] == "estimate"
    assert est["provenance"]["config"]["estimate"]["target"] == "K"
    rows = _rows(tmp_path / "tableII_collisions.csv")
    assert {r[0] for r in rows[1:]} >= {"K", "Rb", "Cs"}


def test_emission_pattern(tmp_path):
    assert main(["emission-pattern", "--preset", "fig4", "--out", str(tmp_path),
                 "--format", "json"]) == 0
    files = sorted(tmp_path.glob("fig4_emission_*.json"))
    assert len(files) == 2
    d1 = json.loads(files[0].read_text())
    assert len(d1["theta_rad"]) == 181
    # the J=1/2 manifold radiates isotropically
    assert max(d1["I_total"]) - min(d1["I_total"]) < 1e-12


def test_format_flag_overrides_config(tmp_path):
    assert main(["emission-pattern", "--preset", "fig4", "--out", str(tmp_path), "--format", "csv"]) == 0
    assert {p.suffix for p in tmp_path.iterdir()} == {".csv"}


def test_spectrum_and_anisotropy_deterministic(tmp_path, small):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        for cmd in ("spectrum", "anisotropy"):
            assert main([cmd, "--config", str(small), "--out", str(out), "--seed", "3"]) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    assert "t_peaks_near-electrostatic.json" in names
    assert {n.rsplit(".", 1)[1] for n in names} == {"csv", "json", "svg"}
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes(), n
    svg = (outs[0] / "t_anisotropy.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and '"seed": 3' in svg
    aniso = json.loads((outs[0] / "t_anisotropy.json").read_text())
    assert aniso["provenance"]["config"]["seed"] == 3
    rows = _rows(outs[0] / "t_spectrum_near-electrostatic_x_k1.csv")
    assert rows[0] == ["omega_rad_s", "re", "im", "abs"] and len(rows) == 201


def test_validate_exit_code_follows_checks(tmp_path, monkeypatch):
    def fake(outcome):
        return lambda *a, **k: [validation.Check("stub", outcome, {"x": 1.0})]

    monkeypatch.setattr(validation, "run_suite", fake(True))
    assert main(["validate", "--out", str(tmp_path), "--format", "json"]) == 0
    assert json.loads((tmp_path / "validate.json").read_text())["passed"] is True
    monkeypatch.setattr(validation, "run_suite", fake(False))
    assert main(["validate", "--out", str(tmp_path), "--format", "json"]) == 1


@pytest.mark.slow
def test_validate_preset(tmp_path, capsys):
    rc = main(["validate", "--preset", "validate-small", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    doc = json.loads((tmp_path / "validate_validate.json").read_text())
    assert doc["passed"] is (rc == 0)
    assert [c["name"] for c in doc["checks"]][:2] == ["single atom kappa=1", "coupling off silences kappa=2"]
    assert out.count("PASS") + out.count("FAIL") == 5
    assert rc == 0
