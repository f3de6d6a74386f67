import json
import shutil
import subprocess

import pytest

from dofsp.cli import main, parse_grid, UsageError


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_two_party_text(capsys):
    code, out, _ = run(capsys, "run", "--instance", "example1.json", "--name", "mapping1-N2=2")
    assert code == 0
    assert "P*         {C, G}" in out
    assert "ledger     U=48 D=6 C=54" in out and "formula    D=6 U=48 C=54" in out


def test_run_ring_and_star_json(capsys):
    code, out, _ = run(capsys, "run", "--instance", "example2.json", "--format", "json")
    (rep,) = json.loads(out)
    assert code == 0 and rep["cost"]["C"] == 54 and rep["naive"] == {"C": 80}
    code, out, _ = run(capsys, "run", "--instance", "example3.json", "--format", "json", "--name", "star-Ni=3")
    (rep,) = json.loads(out)
    assert rep["solution"] == ["G"] and rep["cost"]["C"] == 198


def test_run_is_byte_identical_for_a_seed(capsys):
    args = ("run", "--instance", "example2.json", "--seed", "11", "--format", "json", "--transcript")
    assert run(capsys, *args)[1] == run(capsys, *args)[1]
    other = run(capsys, "run", "--instance", "example2.json", "--seed", "12", "--format", "json", "--transcript")[1]
    assert other != run(capsys, *args)[1]


def test_run_naive_topology(capsys):
    code, out, _ = run(capsys, "run", "--instance", "example1.json", "--name", "mapping1-N2=2",
                       "--topology", "naive_two_party", "--format", "json")
    (rep,) = json.loads(out)
    assert rep["leader_knowledge"] == ["A", "C", "D", "G"]


def test_exit_codes(capsys, tmp_path):
    assert run(capsys, "run", "--instance", str(tmp_path / "missing.json"))[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "run", "--instance", str(bad))[0] == 1
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"alphabet": ["A", "B"], "sets": [["A"], ["B"]], "objective": {"values": [1, 2]},
                                 "databases": [1, 2], "topology": "two_party"}))
    code, _, err = run(capsys, "run", "--instance", str(empty))
    assert code == 2 and "empty intersection" in err
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_peq_default_grid(capsys):
    code, out, _ = run(capsys, "peq")
    lines = out.strip().split("\n")
    assert code == 0 and len(lines) == 21
    assert lines[1].startswith("ring,10,,2,1,2.92969e-03")
    assert lines[-1].split(",")[5] == "9.67000e-08"


def test_peq_empty_grid_and_mc(capsys, tmp_path):
    assert run(capsys, "peq", "--grid", "")[1] == "topology,K,P1,tau,M,exact,mc_estimate,halfwidth,trials\n"
    target = tmp_path / "fig3.csv"
    code, _, _ = run(capsys, "peq", "--topology", "two_party", "--grid", "P1=5;tau=2:10;M=1:4",
                     "--trials", "2000", "--seed", "5", "--out", str(target))
    rows = target.read_text(encoding="utf-8").strip().split("\n")[1:]
    assert code == 0 and len(rows) == 36
    for M in range(1, 5):
        exact = [float(r.split(",")[5]) for r in rows if r.split(",")[4] == str(M)]
        assert exact == sorted(exact, reverse=True)


def test_grid_errors():
    with pytest.raises(UsageError):
        parse_grid("tau=2;M=1", "ring")
    with pytest.raises(UsageError):
        parse_grid("K=4;tau=x;M=1", "ring")
    with pytest.raises(UsageError):
        parse_grid("K=4;tau=2;M=1;Q=3", "ring")
    assert len(parse_grid("P1=3;tau=2|3;M=1:4", "star")) == 6


def test_audit_mutation_fails_with_counterexample(capsys):
    code, out, _ = run(capsys, "audit", "--mutate", "drop-mask")
    data = json.loads(out)
    assert code == 3
    assert data["checks"][0]["verdict"] == "FAIL" and data["checks"][0]["counterexample"]


def test_audit_naive_expect_leak(capsys):
    code, out, _ = run(capsys, "audit", "--protocol", "naive", "--expect-leak")
    data = json.loads(out)
    assert code == 0
    assert data["leakage_is_full_support"] is True
    assert data["leakage_index_set"] == [[1, 2, 3]]


def test_audit_single_protocol(capsys):
    code, out, _ = run(capsys, "audit", "--protocol", "ring")
    data = json.loads(out)
    ring_checks = [c for c in data["checks"] if c["check"] != "mutation_sensitivity"]
    assert all(c["verdict"] == "PASS" for c in ring_checks)
    assert {c["check"] for c in data["checks"]} == {"zero_leakage", "leader_leakage", "reliability",
                                                    "mutation_sensitivity"}
    assert code == 0


def test_verify_examples(capsys):
    code, out, _ = run(capsys, "verify-examples")
    assert code == 0
    assert "MISMATCH" not in out
    assert out.count("differs") == 3


@pytest.mark.skipif(shutil.which("dofsp") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["dofsp", "run", "--instance", "example2.json"], capture_output=True, text=True)
    assert res.returncode == 0 and "C=54" in res.stdout
