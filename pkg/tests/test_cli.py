import json

import pytest

from multiway.cli import EXIT_BUDGET, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_OK, err
    doc = json.loads(out)
    assert doc["schema"] == 1 and doc["operation"] == argv[0]
    assert doc["seed"] == doc["config"]["seed"]
    for r in doc["results"].values():
        assert r["source"]
    return doc


def value(doc, name):
    return doc["results"][name]["value"]


def test_gap_grid(capsys):
    doc = report(capsys, "gap", "--kind", "grid", "--k", "3")
    assert value(doc, "opt") == 3 and value(doc, "sym") == 4
    assert round(value(doc, "ratio"), 4) == 1.3333
    assert doc["gap_report"]["ratio"] == value(doc, "ratio")


def test_lp_hk_certify(capsys):
    doc = report(capsys, "lp", "--kind", "hk", "--k", "3", "--certify")
    assert value(doc, "cert_objective") == pytest.approx(1.5)
    assert value(doc, "cert_feasible") is True
    assert value(doc, "brute") == 2
    assert value(doc, "lp_value") <= 1.5 + 1e-7


def test_compare_hmp(capsys):
    doc = report(capsys, "compare", "--kind", "hmp-cycle")
    assert "SEPARATED" in doc["flags"]
    assert value(doc, "delta") > 1e-4


def test_gen_solve_round_files(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    sol = tmp_path / "sol.json"
    assert main(["gen", "--kind", "coverage", "--k", "3", "--n", "7", "--m", "5", "--seed", "4",
                 "--out", str(inst)]) == EXIT_OK
    doc = json.loads(inst.read_text())
    assert doc["schema"] == 1 and doc["kind"] == "coverage" and doc["terminals"] == [0, 1, 2]
    assert main(["solve", "--instance", str(inst), "--out", str(sol)]) == EXIT_OK
    capsys.readouterr()
    doc = report(capsys, "round", "--instance", str(inst), "--x", str(sol), "--theta", "0.7", "--i-star", "2")
    assert "GUARANTEE_OK" in doc["flags"]
    assert len(value(doc, "partition")) == 7
    assert [e["name"] for e in doc["lemmas"]["entries"]] == ["cupcap", "ce", "bound1", "bound2", "theorem"]


def test_reports_deterministic(capsys):
    a = report(capsys, "solve", "--kind", "graph-mc", "--n", "7", "--m", "9", "--seed", "3")
    b = report(capsys, "solve", "--kind", "graph-mc", "--n", "7", "--m", "9", "--seed", "3")
    assert a == b


def test_text_format(capsys):
    code, out, _ = run(capsys, "brute", "--kind", "grid", "--k", "3", "--format", "text")
    assert code == EXIT_OK
    assert "integral_opt = 3  [brute_force_partition]" in out
    assert "symmetric_opt = 4  [brute_force_symmetric]" in out


def test_emit_lp(tmp_path, capsys):
    path = tmp_path / "hk.lp"
    report(capsys, "lp", "--kind", "hk", "--k", "3", "--emit-lp", str(path))
    assert path.read_text().startswith("\\ Basic LP")


def test_exit_codes(tmp_path, capsys):
    assert run(capsys, "solve", "--instance", str(tmp_path / "missing.json"))[0] == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "solve", "--instance", str(bad))[0] == EXIT_INPUT
    assert run(capsys, "solve", "--kind", "grid", "--instance", str(bad))[0] == EXIT_INPUT
    assert run(capsys, "solve", "--kind", "hk")[0] == EXIT_INPUT
    assert run(capsys, "brute", "--kind", "graph-mc", "--n", "40", "--m", "60")[0] == EXIT_BUDGET
    infeasible = tmp_path / "inf.json"
    infeasible.write_text(json.dumps({"schema": 1, "problem": "mincsp", "instance": {
        "q": 2, "n": 2, "pins": [[0, 0], [1, 0]],
        "edges": [{"vertices": [0, 1], "weight": 1.0, "table": [None, 0, 0, None]}]}}))
    code, _, err = run(capsys, "lp", "--instance", str(infeasible))
    assert code == EXIT_INFEASIBLE and "infeasible" in err
