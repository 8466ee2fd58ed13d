import json
import subprocess
import sys

import jsonschema
import pytest

from prexpect.cli import load_schema, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    return code, json.loads(out)


def test_coins_wp(capsys):
    code, data = run_json(capsys, "wp", "--corpus", "coins", "--post", "[x = y]")
    assert code == 0 and data["converged"]
    assert set(data["values"].values()) == {0.5}


def test_fact_runtime(capsys):
    code, data = run_json(capsys, "ert", "--corpus", "fact", "--bind", "x=0", "--post", "0")
    assert code == 0
    assert set(data["values"].values()) == {3.0}


def test_compare_rec3(capsys):
    code, data = run_json(capsys, "compare", "--corpus", "rec3", "--post", "1", "--n", "4")
    assert code == 0 and data["max_gap"] < 1e-9


def test_corpus_commands(capsys):
    code, data = run_json(capsys, "corpus", "list")
    assert code == 0 and len(data) == 7
    code, out, _ = run(capsys, "corpus", "show", "rec3")
    assert code == 0 and "call P" in out
    code, _, err = run(capsys, "corpus", "show", "nope")
    assert code == 3 and "nope" in err


def test_check_exit_codes(capsys):
    base = ["check", "--corpus", "rec3", "--rule", "wp-rec", "--proc", "P", "--post", "1"]
    assert run(capsys, *base, "--bound", "0.7")[0] == 0
    code, data = run_json(capsys, *base, "--bound", "0.6")
    assert code == 1 and data["status"] == "rejected" and abs(data["lhs"] - 0.608) < 1e-12
    code, data = run_json(capsys, "check", "--corpus", "evenodd", "--rule", "wp-rec", "--proc", "E",
                          "--post", "1", "--bound", "2/3")
    assert code == 2 and data["status"] == "inconclusive"
    code, data = run_json(capsys, "check", "--corpus", "evenodd", "--rule", "wp-rec", "--proc", "E,O",
                          "--post", "1", "--bound", "2/3;1/3")
    assert code == 0


def test_check_claims_file(capsys, tmp_path):
    path = tmp_path / "claims.json"
    path.write_text(json.dumps({"rule": "wp-rec-omega", "proc": "P", "post": "1",
                                "lower": "recur(n, 0, 1/2 + prev*prev*prev/2)", "depth": 20}))
    code, data = run_json(capsys, "check", "--corpus", "rec3", "--claims", str(path))
    assert code == 0 and data == {"status": "checked", "proc": "P", "depth": 20}


def test_not_converged_exit(capsys):
    code, data = run_json(capsys, "ert", "--corpus", "rec3", "--post", "0", "--max-iters", "50")
    assert code == 2 and not data["converged"]


def test_usage_errors(capsys):
    assert run(capsys, "wp", "--corpus", "rec3")[0] == 3
    assert run(capsys, "wp", "--corpus", "nope", "--post", "1")[0] == 3
    assert run(capsys, "wp", "--corpus", "coins", "--post", "[z = 1]")[0] == 3
    assert run(capsys, "wp", "--corpus", "coins", "--post", "1", "--bind", "x=7")[0] == 3
    assert run(capsys, "simulate", "--corpus", "coins")[0] == 3
    assert run(capsys, "frobnicate")[0] == 3


def test_file_input_and_parse_error(capsys, tmp_path):
    good = tmp_path / "walk.prg"
    good.write_text("var x : 0..3;\nmain { while (x > 0) { x := x - 1 } }\n")
    code, data = run_json(capsys, "wp", "--file", str(good), "--post", "[x = 0]")
    assert code == 0 and set(data["values"].values()) == {1.0}
    bad = tmp_path / "bad.prg"
    bad.write_text("main { skip")
    code, _, err = run(capsys, "wp", "--file", str(bad), "--post", "1")
    assert code == 3 and "bad.prg:1:" in err


def test_array_bindings(capsys):
    code, data = run_json(capsys, "wp", "--corpus", "binsearch", "--bind", "a=[2,4,6,8,10,12]",
                          "--bind", "val=8", "--bind", "left=0", "--bind", "right=5",
                          "--post", "[a[mid] = val]")
    assert code == 0 and len(data["values"]) == 6
    assert all(abs(v - 1) < 1e-12 for v in data["values"].values())
    # six index positions but only three elements: indexing leaves the array
    code, _, err = run(capsys, "wp", "--corpus", "binsearch", "--bind", "a=[1,4,7]", "--post", "1")
    assert code == 3 and err


def test_simulate_and_prmc(capsys):
    code, a = run_json(capsys, "simulate", "--corpus", "rec3", "--runs", "2000", "--seed", "5")
    code2, b = run_json(capsys, "simulate", "--corpus", "rec3", "--runs", "2000", "--seed", "5")
    assert code == code2 == 0 and a == b
    code, data = run_json(capsys, "prmc", "--corpus", "rec3", "--stack-bound", "3")
    assert code == 0 and data["truncated"] and abs(data["value"] - 0.5625 - 0.5 * 0.5625 ** 3 + 0.5625) < 1
    code, out, _ = run(capsys, "prmc", "--corpus", "rec3", "--dot")
    assert code == 0 and out.startswith("digraph")


def test_config_file(capsys, tmp_path):
    conf = tmp_path / "p.toml"
    conf.write_text("[prexpect]\nmax_iters = 3\n")
    code, data = run_json(capsys, "wp", "--corpus", "rec3", "--post", "1", "--config", str(conf))
    assert code == 2 and data["iterations"] == 3
    conf.write_text("bogus = 1\n")
    assert run(capsys, "wp", "--corpus", "rec3", "--post", "1", "--config", str(conf))[0] == 3


@pytest.mark.parametrize("argv, schema", [
    (["wp", "--corpus", "rec3", "--post", "1"], "transformer"),
    (["ert", "--corpus", "binsearch", "--post", "0"], "transformer"),
    (["check", "--corpus", "rec3", "--rule", "wp-rec", "--proc", "P", "--post", "1", "--bound", "0.6"], "verdict"),
    (["simulate", "--corpus", "coins", "--bind", "x=0", "--bind", "y=0", "--runs", "100"], "simulate"),
    (["prmc", "--corpus", "fact", "--bind", "x=2", "--bind", "y=0", "--runtime"], "prmc"),
    (["compare", "--corpus", "evenodd", "--n", "3"], "compare"),
    (["corpus", "list"], "corpus"),
])
def test_json_validates(capsys, argv, schema):
    _, data = run_json(capsys, *argv)
    jsonschema.validate(data, load_schema(schema))


def test_deterministic_output(capsys):
    argv = ["ert", "--corpus", "randomwalk", "--post", "x"]
    assert run(capsys, *argv) == run(capsys, *argv)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "prexpect", "corpus", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "rec3" in proc.stdout
