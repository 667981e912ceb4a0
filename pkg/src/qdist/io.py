"""File formats: circuit JSON, parameter JSON, result CSVs and OpenQASM 2.0.

JSON floats are written with 17 significant digits and fields in a fixed
order, so parse -> serialise is byte-identical. CSV floats use 12.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .ansatz import expand_controls
from .sim import Circuit, Gate

FORMAT_VERSION = 1


def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite float {x}")
    return format(x, ".17g")


def fmt_csv(x: float) -> str:
    return format(float(x), ".12g")


def _json_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v) if math.isfinite(v) else "null"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def dumps(obj: dict) -> str:
    """Canonical JSON: one top-level key per line, insertion order kept."""
    lines = [f"  {json.dumps(k)}: {_json_value(v)}" for k, v in obj.items()]
    return "{\n" + ",\n".join(lines) + "\n}\n"


# -- circuits ------------------------------------------------------------------

def _gate_dict(g: Gate) -> dict:
    d = {"kind": g.kind, "target": g.target,
         "controls": [{"qubit": q, "bit": b} for q, b in g.controls]}
    if g.param is not None:
        d["angle"] = {"param": g.param}
    elif g.angle is not None:
        d["angle"] = {"value": float(g.angle)}
    return d


def circuit_to_json(circuit: Circuit) -> str:
    head = (f'{{\n  "version": {FORMAT_VERSION},\n  "num_qubits": {circuit.num_qubits},\n'
            f'  "num_params": {circuit.num_params},\n  "gates": [')
    body = ",\n".join("    " + _json_value(_gate_dict(g)) for g in circuit.gates)
    return head + ("\n" + body + "\n  ]\n}\n" if body else "]\n}\n")


def circuit_from_json(text: str) -> Circuit:
    d = json.loads(text)
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported circuit format version {d.get('version')!r}")
    gates = []
    for g in d["gates"]:
        angle = g.get("angle") or {}
        gates.append(Gate(
            kind=g["kind"],
            target=int(g["target"]),
            controls=tuple((int(c["qubit"]), int(c["bit"])) for c in g.get("controls", [])),
            angle=float(angle["value"]) if "value" in angle else None,
            param=int(angle["param"]) if "param" in angle else None,
        ))
    return Circuit(int(d["num_qubits"]), gates, int(d["num_params"]))


def write_circuit(circuit: Circuit, path) -> None:
    Path(path).write_text(circuit_to_json(circuit))


def read_circuit(path) -> Circuit:
    return circuit_from_json(Path(path).read_text())


def read_params(path) -> np.ndarray:
    d = json.loads(Path(path).read_text())
    values = d["params"] if isinstance(d, dict) else d
    return np.asarray(values, dtype=np.float64)


# -- CSV -------------------------------------------------------------------------

def write_rows(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt_csv(v) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row) + "\n")


def write_counts(path, counts, num_qubits: int) -> None:
    write_rows(path, ["state", "count"],
               ((format(i, f"0{num_qubits}b"), int(c)) for i, c in enumerate(counts)))


# -- OpenQASM 2.0 ----------------------------------------------------------------

_QASM_HEADER = """OPENQASM 2.0;
include "qelib1.inc";
"""
_CCRY_DEF = """gate ccry(theta) a,b,c
{
  cry(theta/2) b,c;
  cx a,b;
  cry(-theta/2) b,c;
  cx a,b;
  cry(theta/2) a,c;
}
"""


def to_qasm(circuit: Circuit, params=None) -> str:
    """OpenQASM 2.0 with bound angles and control-on-0 expanded to X pairs.

    ``qubit k`` maps to ``q[k]``. Rotations with more than two controls
    are not expressible here and raise ``ValueError``.
    """
    params = np.asarray(params if params is not None else [], dtype=np.float64)
    if len(params) != circuit.num_params:
        raise ValueError(f"expected {circuit.num_params} parameters, got {len(params)}")
    gates = expand_controls(circuit)
    body = []
    for g in gates:
        qs = [f"q[{q}]" for q, _ in g.controls] + [f"q[{g.target}]"]
        args = ",".join(qs)
        if g.kind == "RY":
            body.append(f"ry({fmt_float(g.resolve_angle(params))}) {args};")
        elif g.kind == "X":
            body.append(f"x {args};")
        elif g.kind == "CNOT":
            body.append(f"cx {args};")
        elif g.kind == "CZ":
            body.append(f"cz {args};")
        elif g.kind == "CRY":
            body.append(f"cry({fmt_float(g.resolve_angle(params))}) {args};")
        elif g.kind == "CCRY":
            body.append(f"ccry({fmt_float(g.resolve_angle(params))}) {args};")
        else:
            raise ValueError(f"{g.kind} with {len(g.controls)} controls has no OpenQASM 2.0 form here")
    needs_ccry = any(g.kind == "CCRY" for g in gates)
    return (_QASM_HEADER + (_CCRY_DEF if needs_ccry else "")
            + f"qreg q[{circuit.num_qubits}];\n" + "\n".join(body) + ("\n" if body else ""))
