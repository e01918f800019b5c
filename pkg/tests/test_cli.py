import csv
import json

import pytest

from dsqft.cli import main
from dsqft.dispersion import threshold
from dsqft.reports import RunConfig, report_bundle, run


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_stationary_alias(capsys):
    assert main(["stationary", "check", "--n", "3", "--epsilon", "0.1"]) == 0
    out = _json(capsys)
    assert out["certificates"][0]["body"]["status"] == "zero"
    assert all(len(c["id"]) == 64 for c in out["certificates"])


def test_modes_validate(tmp_path, capsys):
    assert main(["modes-validate", "--d", "4", "--frak-m2", "2", "--s-max", "30",
                 "--output-dir", str(tmp_path)]) == 0
    out = _json(capsys)
    assert out["max_residual"] < 1e-8 and out["max_wronskian_drift"] < 1e-8
    rows = list(csv.DictReader(open(tmp_path / "modes.csv")))
    assert len(rows) == 31 and all(float(r["residual"]) < 1e-8 for r in rows)


def test_npoint_fixture_and_replay(tmp_path, capsys):
    a = tmp_path / "a"
    assert main(["npoint", "--d", "6", "--frak-m", "3", "--n", "3", "--fixture", "tri-bump",
                 "--output-dir", str(a)]) == 0
    out = _json(capsys)
    assert {"value", "error", "terms"} <= set(out) and len(out["terms"]) == 3
    b = tmp_path / "b"
    assert main(["run", str(a / "config.json"), "--output-dir", str(b)]) == 0
    assert (a / "terms.csv").read_bytes() == (b / "terms.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()


def test_exit_codes(capsys):
    assert main(["npoint", "--bogus"]) == 64
    assert main(["nonsense"]) == 64
    assert main(["npoint", "--d", "4", "--frak-m", "3", "--fixture", "tri-bump"]) == 64
    assert main(["npoint", "--fixture", "missing-fixture"]) == 64
    assert main(["dispersion", "scan", "--d", "4", "--frak-m2", "2", "--eps-min", "1e-13"]) == 3
    assert main(["contrast", "--fixture", "tri-bump"]) == 2
    assert main(["report"]) == 64


def test_config_round_trip():
    cfg = RunConfig("stationary-check", options={"n": 4, "epsilon": "1"})
    again = RunConfig.from_json(cfg.to_json())
    assert again.to_dict() == cfg.to_dict()
    s1, _, f1 = run(cfg)
    s2, _, f2 = run(again)
    assert s1 == s2 == 0 and f1 == f2


def test_report_bundle(tmp_path, capsys):
    runs = []
    for name, argv in [("disp", ["dispersion-scan", "--d", "4", "--frak-m2", "2", "--n", "3"]),
                       ("con", ["contrast", "--fixture", "tri-bump-d5"]),
                       ("gns", ["gns-gram", "--fixture", "tri-bump"])]:
        d = tmp_path / name
        assert main(argv + ["--output-dir", str(d)]) == 0
        runs.append(str(d))
    capsys.readouterr()
    files = report_bundle(runs, tmp_path / "bundle")
    rows = list(csv.DictReader(files["threshold.csv"].splitlines()))
    assert len(rows) == 20
    for r in rows:
        v = threshold(int(r["d"]), int(r["n"]))
        assert float(r["exponent"]) == v.exponent and (r["passes"] == "True") == v.passes
    assert "exact 0" in files["contrast.csv"]
    assert "(1, 0, 1)" in files["report.md"]
    assert (tmp_path / "bundle" / "report.md").exists()
    with pytest.raises(KeyError):
        report_bundle([])
