import json

import pytest

from stiefel_radon.cli import main
from stiefel_radon.errors import ConfigError
from stiefel_radon.experiments import (SCHEMA, SEED_ENV, TAGS, ExperimentSpec, Tolerance, load_suite,
                                       parse_suite, run_experiment, run_suite, strip_runtime)


def test_tolerance_rule():
    t = Tolerance(4.0, 0.05)
    assert t.passes(1.04, 0.0, 1.0)
    assert not t.passes(1.06, 0.0, 1.0)
    assert t.passes(1.06, 0.02, 1.0)
    assert not t.passes(float("nan"), 0.0, 1.0)


def test_default_suite_covers_criteria():
    specs = load_suite()
    crit = {TAGS[s.name].criterion for s in specs}
    assert set(range(1, 12)) <= crit


def test_empty_suite_passes():
    report = run_suite(parse_suite({}))
    assert report["schema"] == SCHEMA and report["pass"] and report["experiments"] == []


def test_inadmissible_spec_is_recorded():
    rec = run_experiment(ExperimentSpec("bridge", {"n": 5, "m": 2, "k": 2, "j": 1}))
    assert rec["status"] == "inadmissible" and not rec["pass"]
    assert "violated" in rec["error"]


@pytest.mark.parametrize("data,where", [
    ({"experiment": [{"name": "nope"}]}, "experiment[0].name"),
    ({"experiment": [{"name": "bridge", "samples": -3}]}, "experiment[0].samples"),
    ({"experiment": [{"name": "bridge", "bogus": 1}]}, "experiment[0]"),
    ({"experiment": [{"name": "bridge", "tolerance": {"relative_cap": "x"}}]}, "experiment[0].tolerance"),
    ({"seed": "abc"}, "seed"),
    ({"experiments": []}, "top-level"),
])
def test_config_errors_name_the_field(data, where):
    with pytest.raises(ConfigError, match=where.replace("[", r"\[").replace("]", r"\]")):
        parse_suite(data, "suite.toml")


def test_toml_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("seed = 1\n[[experiment]\nname = 'x'\n")
    with pytest.raises(ConfigError, match="line 2"):
        load_suite(p)


def test_seed_precedence(monkeypatch):
    data = {"seed": 5, "experiment": [{"name": "bridge"}, {"name": "bridge", "label": "b2", "seed": 9}]}
    assert [s.seed for s in parse_suite(data)] == [5, 9]
    monkeypatch.setenv(SEED_ENV, "77")
    assert parse_suite(data)[0].seed == 77
    assert parse_suite(data, seed=3)[0].seed == 3


def test_duplicate_labels_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_suite({"experiment": [{"name": "bridge"}, {"name": "bridge"}]})


SMALL = """
seed = 4
[[experiment]]
name = "sweep-cosine-mass"
samples = 20000
params = { n = 4, m = 1, k = 2, lambdas = [0.5, 2.0], sampler = "haar" }

[[experiment]]
name = "mass-cosine"
samples = 20000
params = { cases = [[4, 1, 1, 2.0]] }
"""


def test_cli_verify_run(tmp_path):
    cfg = tmp_path / "suite.toml"
    cfg.write_text(SMALL)
    out = tmp_path / "report.json"
    code = main(["verify", "run", "--config", str(cfg), "--out", str(out), "--csv", str(tmp_path / "csv"),
                 "--threads", "2"])
    report = json.loads(out.read_text())
    assert code == 0 and report["pass"] and report["schema"] == 1
    for rec in report["experiments"]:
        for c in rec["checks"]:
            assert c["expected"]["provenance"]
    lines = (tmp_path / "csv" / "sweep-cosine-mass.csv").read_text().splitlines()
    assert lines[0] == "lambda,expected,observed,stderr,pass" and len(lines) == 3


def test_reports_reproducible_across_threads(tmp_path):
    specs = parse_suite(__import__("tomli").loads(SMALL))
    a = run_suite(specs, threads=1)
    b = run_suite(specs, threads=3, jobs=2)
    assert json.dumps(strip_runtime(a), sort_keys=True) == json.dumps(strip_runtime(b), sort_keys=True)


def test_cli_inadmissible_exit_code(tmp_path):
    cfg = tmp_path / "suite.toml"
    cfg.write_text('[[experiment]]\nname = "bridge"\nparams = { n = 5, m = 2, k = 2, j = 1 }\n')
    out = tmp_path / "r.json"
    assert main(["verify", "run", "--config", str(cfg), "--out", str(out)]) == 1
    assert json.loads(out.read_text())["experiments"][0]["status"] == "inadmissible"


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "suite.toml"
    cfg.write_text('[[experiment]]\nname = "nope"\n')
    assert main(["verify", "run", "--config", str(cfg)]) == 2
    assert "experiment[0].name" in capsys.readouterr().err


def test_cli_commands(capsys):
    assert main(["constants", "--kind", "delta_0", "--n", "4", "--m", "1", "--k", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(4.0)
    assert main(["constants", "--kind", "gamma_mk", "--n", "6", "--m", "2", "--k", "3", "--lambda", "0"]) == 0
    assert json.loads(capsys.readouterr().out)["pole_order"] == 1
    assert main(["transform", "--name", "funk", "--n", "4", "--m", "1", "--k", "1",
                 "--f", "trace_quadratic:S=diag(1,0,0,0)", "--samples", "20000"]) == 0
    assert json.loads(capsys.readouterr().out)["mean"] == pytest.approx(1 / 3, abs=0.02)
    assert main(["diffop", "--check", "bernstein", "--n", "4", "--m", "2", "--lambda", "-1.3"]) == 0
    assert json.loads(capsys.readouterr().out)["max_relative_error_jets"] < 1e-8
    assert main(["continue", "--lambda", "-3", "--n", "4", "--m", "1", "--samples", "20000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["estimate"]["mean"] == pytest.approx(out["f_at_point"], abs=0.05)
    assert main(["verify", "list"]) == 0
    assert "invert-nonlocal" in capsys.readouterr().out
    assert main(["transform", "--name", "cosine", "--n", "4", "--m", "1", "--k", "2", "--lambda", "-2.5"]) == 2
