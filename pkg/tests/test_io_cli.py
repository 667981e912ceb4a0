import csv
import json
import math
import re
import subprocess
import sys

import numpy as np
import pytest

from conftest import reference_state
from qdist import cli, io
from qdist.ansatz import AnsatzSpec, build, build_grover_rudolph
from qdist.experiments import aggregate, read_report
from qdist.sim import Circuit, Gate, simulate


# -- circuit JSON --------------------------------------------------------------

@pytest.mark.parametrize("spec", [AnsatzSpec("symmetric", 4), AnsatzSpec("asymmetric", 5, skew="negative"),
                                  AnsatzSpec("strong_skew", 6, pivot=3), AnsatzSpec("rycz", 3, layers=2)])
def test_circuit_json_round_trip(spec):
    circ, _ = build(spec)
    text = io.circuit_to_json(circ)
    back = io.circuit_from_json(text)
    assert back.gates == circ.gates and back.num_params == circ.num_params
    assert io.circuit_to_json(back) == text


def test_circuit_json_schema():
    circ = Circuit(5, [Gate("RY", 4, angle=math.pi / 2), Gate("CRY", 0, ((4, 0),), param=0)], 1)
    d = json.loads(io.circuit_to_json(circ))
    assert list(d) == ["version", "num_qubits", "num_params", "gates"]
    assert d["version"] == 1
    assert d["gates"][0] == {"kind": "RY", "target": 4, "controls": [], "angle": {"value": 1.5707963267948966}}
    assert d["gates"][1] == {"kind": "CRY", "target": 0, "controls": [{"qubit": 4, "bit": 0}],
                             "angle": {"param": 0}}


def test_fixed_angles_survive_round_trip():
    t = np.random.default_rng(1).dirichlet(np.ones(16))
    circ = build_grover_rudolph(t)
    back = io.circuit_from_json(io.circuit_to_json(circ))
    assert np.array_equal(simulate(back).amplitudes, simulate(circ).amplitudes)


def test_bad_version():
    with pytest.raises(ValueError):
        io.circuit_from_json('{"version": 2, "num_qubits": 1, "num_params": 0, "gates": []}')


def test_float_formatting():
    assert io.fmt_float(0.1) == "0.10000000000000001"
    assert io.fmt_csv(1 / 3) == "0.333333333333"
    with pytest.raises(ValueError):
        io.fmt_float(math.nan)


# -- OpenQASM ------------------------------------------------------------------

def parse_qasm(text):
    """Tiny OpenQASM 2.0 reader for the subset the exporter emits; expands user gates."""
    defs = {}
    for m in re.finditer(r"gate (\w+)\((\w+)\) ([\w,]+)\s*\{(.*?)\}", text, re.S):
        defs[m.group(1)] = (m.group(2), m.group(3).split(","), [s.strip() for s in m.group(4).split(";") if s.strip()])
    n = int(re.search(r"qreg q\[(\d+)\];", text).group(1))
    body = text[text.index("qreg"):].splitlines()[1:]
    gates = []

    def emit(name, arg, qubits):
        if name == "ry":
            gates.append(Gate("RY", qubits[0], angle=arg))
        elif name == "x":
            gates.append(Gate("X", qubits[0]))
        elif name == "cx":
            gates.append(Gate("CNOT", qubits[1], ((qubits[0], 1),)))
        elif name == "cz":
            gates.append(Gate("CZ", qubits[1], ((qubits[0], 1),)))
        elif name == "cry":
            gates.append(Gate("CRY", qubits[1], ((qubits[0], 1),), angle=arg))
        else:
            pname, formals, lines = defs[name]
            env = dict(zip(formals, qubits))
            for line in lines:
                sub, rest = re.match(r"(\w+(?:\([^)]*\))?)\s+(.*)", line).groups()
                gname, _, expr = sub.partition("(")
                val = eval(expr.rstrip(")"), {}, {pname: arg}) if expr else None
                emit(gname, val, [env[a.strip()] for a in rest.split(",")])

    for line in body:
        line = line.strip().rstrip(";")
        if not line:
            continue
        m = re.match(r"(\w+)(?:\(([^)]*)\))?\s+(.*)", line)
        name, arg, qs = m.groups()
        emit(name, float(arg) if arg else None, [int(q) for q in re.findall(r"q\[(\d+)\]", qs)])
    return Circuit(n, gates, 0)


@pytest.mark.parametrize("spec", [AnsatzSpec("symmetric", 3), AnsatzSpec("asymmetric", 5),
                                  AnsatzSpec("asymmetric", 4, skew="negative", fine_tune="01"),
                                  AnsatzSpec("strong_skew", 6, pivot=3), AnsatzSpec("rycz", 4, layers=2,
                                                                                    entanglement="circular")])
def test_qasm_export_simulates_identically(spec):
    circ, cs = build(spec)
    rng = np.random.default_rng(5)
    params = cs.witness + rng.uniform(-0.5, 0.5, cs.num_params)
    text = io.to_qasm(circ, params)
    assert text.startswith("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n")
    parsed = parse_qasm(text)
    assert np.allclose(reference_state(parsed, []), simulate(circ, params).amplitudes, atol=1e-12)


def test_qasm_rejects_mcry_and_bad_params():
    circ = build_grover_rudolph(np.full(16, 1 / 16))
    with pytest.raises(ValueError):
        io.to_qasm(circ)
    c2, _ = build(AnsatzSpec("symmetric", 2))
    with pytest.raises(ValueError):
        io.to_qasm(c2, [])


# -- CLI -----------------------------------------------------------------------

def run(argv, capsys):
    try:
        code = cli.main(argv)
    except SystemExit as e:
        code = e.code
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_build_symmetric(tmp_path, capsys):
    out_file = tmp_path / "c.json"
    code, out, _ = run(["build", "--family", "symmetric", "--qubits", "6", "--out", str(out_file)], capsys)
    assert code == 0
    assert "RY 6" in out and "CNOT 5" in out and "params 5" in out
    circ = io.read_circuit(out_file)
    assert circ.count() == {"RY": 6, "CNOT": 5}


def test_cli_build_rycz(capsys):
    code, out, _ = run(["build", "--family", "rycz", "--qubits", "4", "--layers", "1"], capsys)
    assert code == 0 and "params 8" in out


@pytest.mark.parametrize("argv,code", [
    (["build", "--family", "symmetric", "--qubits", "1"], 2),
    (["build", "--family", "nope", "--qubits", "3"], 2),
    (["build", "--family", "strong_skew", "--qubits", "6", "--pivot", "9"], 2),
    (["build", "--family", "strong_skew", "--qubits", "6", "--pivot", "x"], 2),
    (["simulate", "--circuit", "/nonexistent/c.json"], 4),
    (["report", "/nonexistent/dir"], 4),
    ([], 2),
])
def test_cli_error_codes(argv, code, capsys):
    got, _, err = run(argv, capsys)
    assert got == code
    lines = err.strip().splitlines()
    assert len(lines) == 1 and re.match(r"^error\[[a-z-]+\]: ", lines[0])


def test_cli_infeasible_exit_code(tmp_path, capsys, monkeypatch):
    from qdist import ansatz

    def boom(*a, **k):
        raise ansatz.InfeasibleConstraints("no feasible point")
    monkeypatch.setattr(cli, "build", boom)
    code, _, err = run(["build", "--family", "symmetric", "--qubits", "3"], capsys)
    assert code == 3 and err.startswith("error[infeasible]:")


def _circuit_and_params(tmp_path, capsys, n=3):
    c = tmp_path / "c.json"
    run(["build", "--family", "symmetric", "--qubits", str(n), "--out", str(c)], capsys)
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"params": [2.0] * (n - 1)}))
    return c, p


def test_cli_sample(tmp_path, capsys):
    c, p = _circuit_and_params(tmp_path, capsys)
    out = tmp_path / "counts.csv"
    assert run(["sample", "--circuit", str(c), "--params", str(p), "--shots", "10000", "--seed", "4",
                "--out", str(out)], capsys)[0] == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["state"] for r in rows] == [format(i, "03b") for i in range(8)]
    assert sum(int(r["count"]) for r in rows) == 10000
    first = out.read_bytes()
    run(["sample", "--circuit", str(c), "--params", str(p), "--shots", "10000", "--seed", "4",
         "--out", str(out)], capsys)
    assert out.read_bytes() == first
    run(["sample", "--circuit", str(c), "--params", str(p), "--shots", "1", "--out", str(out)], capsys)
    assert sum(int(r["count"]) > 0 for r in csv.DictReader(open(out))) == 1


def test_cli_sample_param_mismatch(tmp_path, capsys):
    c, _ = _circuit_and_params(tmp_path, capsys)
    bad = tmp_path / "bad.json"
    bad.write_text("[1.0]")
    code, _, err = run(["sample", "--circuit", str(c), "--params", str(bad), "--out", str(tmp_path / "x")], capsys)
    assert code == 2 and err.startswith("error[invalid-argument]:")


def test_cli_simulate_and_qasm(tmp_path, capsys):
    c, p = _circuit_and_params(tmp_path, capsys, 2)
    code, out, _ = run(["simulate", "--circuit", str(c), "--params", str(p)], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "bin_index,state,amp_re,amp_im,probability" and len(lines) == 5
    code, out, _ = run(["export-qasm", "--circuit", str(c), "--params", str(p)], capsys)
    assert code == 0 and "cx q[1],q[0];" in out


def test_cli_targets(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert run(["targets", "--qubits", "6", "--target", "chi2", "--out", str(out)], capsys)[0] == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 64 and max(range(64), key=lambda i: float(rows[i]["p"])) == 6


OPT = ["optimize", "--family", "symmetric", "--qubits", "6", "--target", "gaussian",
       "--max-evals", "150", "--restarts", "2"]


def test_cli_optimize_outputs_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(OPT + ["--out", str(a)], capsys)[0] == 0
    assert run(OPT + ["--out", str(b)], capsys)[0] == 0
    run_dir = a / "symmetric_q6_s0"
    names = sorted(x.name for x in run_dir.iterdir())
    assert names == ["circuit.json", "distribution.csv", "loss_trace.csv", "metrics.json", "params.json"]
    for name in names:
        assert (run_dir / name).read_bytes() == (b / "symmetric_q6_s0" / name).read_bytes()
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    rows = list(csv.reader(open(run_dir / "distribution.csv")))
    assert rows[0] == ["bin_index", "x_midpoint", "p_des", "p_gen"] and len(rows) == 65
    m = json.loads((run_dir / "metrics.json").read_text())["metrics"]
    assert {"relative_entropy", "l2_squared", "ks_p_value"} <= set(m)


def test_cli_seed_from_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("QDIST_SEED", "12")
    assert run(OPT + ["--out", str(tmp_path)], capsys)[0] == 0
    assert (tmp_path / "symmetric_q6_s12").is_dir()


def test_cli_compare_and_report(tmp_path, capsys):
    res = tmp_path / "res"
    argv = ["optimize", "--family", "asymmetric", "--qubits", "4", "--target", "lognormal",
            "--max-evals", "80", "--restarts", "1", "--runs", "2", "--compare", "--out", str(res)]
    assert run(argv, capsys)[0] == 0
    assert run(["report", str(res)], capsys)[0] == 0
    rows = read_report(res / "report.csv")
    assert [(r["family"], r["layers"]) for r in rows] == [("asymmetric", ""), ("rycz", "1"), ("rycz", "2"),
                                                          ("rycz", "3")]
    assert all(r["n_runs"] == "2" for r in rows)
    assert list(rows[0]) == ["family", "qubits", "layers", "rel_entropy", "l2_sq", "ks_p", "ks_p_cdf", "n_runs"]


def test_aggregate_means():
    recs = [dict(family="symmetric", qubits=6, layers="", rel_entropy=e, l2_sq=2 * e, ks_p=0.5, ks_p_cdf=0.4)
            for e in (0.1, 0.3)]
    recs.append(dict(family="rycz", qubits=6, layers="2", rel_entropy=1.0, l2_sq=1.0, ks_p=0.1, ks_p_cdf=0.1))
    rows = aggregate(recs)
    assert rows[0][:5] == ["symmetric", 6, "", pytest.approx(0.2), pytest.approx(0.4)] and rows[0][-1] == 2
    assert rows[1][0] == "rycz" and rows[1][-1] == 1


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "qdist.cli", "build", "--family", "symmetric", "--qubits", "3"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "CNOT 2" in r.stdout
