import json

import pytest

from ietlab.cli import ConfigError, emit_plotdata, main, run_batch, run_experiment, validate

BASE = {"seed": 3, "iet": {"perm": {"symmetric": 4}}, "acceleration": {"k_max": 60}, "precision": 200}


def cfg(**extra):
    out = json.loads(json.dumps(BASE))
    out.update(extra)
    return out


def test_validation():
    validate(cfg())
    with pytest.raises(ConfigError):
        validate({"iet": {"perm": {"pi0": "ABC", "pi1": "BAC"}}})
    with pytest.raises(ConfigError):
        validate(cfg(bogus=1))
    with pytest.raises(ConfigError):
        validate({"iet": {"perm": {"symmetric": 4}, "lambda": [1, 2]}})


def test_invalid_permutation_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"iet": {"perm": {"pi0": [1, 2, 3], "pi1": [2, 1, 3]}}}))
    rc = main(["spectrum", "--config", str(p), "--out", str(tmp_path / "o")])
    assert rc == 2
    err = json.loads(capsys.readouterr().err)
    assert err["kind"] == "config"


def test_spectrum_report_and_plot(tmp_path):
    rep = run_experiment(cfg(), "spectrum", tmp_path)
    res = rep["result"]
    assert len(res["exponents"]) == 4
    rows = (tmp_path / "spectrum_plot.csv").read_text().splitlines()
    assert rows[0] == "k,quantity,value"
    # one row per (k, exponent index)
    assert len(rows) - 1 == 4 * res["levels_run"]


def test_reproducible_json(tmp_path):
    c = cfg(experiment="spectrum")
    p = tmp_path / "c.json"
    p.write_text(json.dumps(c))
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / "a")]) == 0
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "spectrum.json").read_bytes()
    assert a == (tmp_path / "b" / "spectrum.json").read_bytes()
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / "c"), "--seed", "4"]) == 0
    assert a != (tmp_path / "c" / "spectrum.json").read_bytes()


def test_solve_fixture(tmp_path):
    c = cfg(cohomology={"fixture": "coboundary", "N": 20000})
    rep = run_experiment(c, "solve", tmp_path)
    assert rep["result"]["residual"] < 1e-8
    assert (tmp_path / "solution.csv").exists()


def test_saddle_report(tmp_path):
    jet = {"sigma": "s", "m": 2, "jet": {"0": [[1, 0]], "1": [[0, 0], [0, 0]], "2": [[0, 0], [1, 0], [0, 0]]}}
    rep = run_experiment(cfg(saddle={"jets": [jet]}), "saddle", tmp_path)
    out = rep["result"]
    assert out["jets"][0]["C"][0]["value"] == pytest.approx([2.0, 0.0])
    assert [r["k_r"] for r in out["k_r"]] == [2, 2, 3, 2, 3, 6, 3, 4, 8]


def test_module_error_exit_code(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg(saddle={"jets": [{"m": 2, "jet": {"1": [[0, 0], [0, 0]]}}]})))
    assert main(["saddle", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["kind"] == "SaddleError"


def test_plotdata_kinds():
    assert emit_plotdata({}, "lognorm") == "k,quantity,value\n"
    rep = {"result": {"elements": [{"tag": [0, "+", 1], "ks": [1, 2], "logs": [0.5, 1.0], "rate": 0.5}]}}
    rows = emit_plotdata(rep, "decay").splitlines()
    assert rows[0] == "k,quantity,value,slope"
    assert rows[1].endswith(",0.5")
    with pytest.raises(ValueError):
        emit_plotdata({}, "nope")


def test_batch(tmp_path):
    good = cfg()
    bad = cfg(saddle={"jets": [{"m": 1, "jet": {}}]})
    res = run_batch([good, bad], "saddle", str(tmp_path), workers=2)
    assert [r["ok"] for r in res] == [True, False]


def test_irregular_phi_names_the_fix(tmp_path, capsys):
    c = cfg(precision=400, phi={"coboundary_power": [[0.8, 0.3]]})
    p = tmp_path / "c.json"
    p.write_text(json.dumps(c))
    assert main(["distributions", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert "distributions.n" in err["error"]
