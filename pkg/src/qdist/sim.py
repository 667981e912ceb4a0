"""Exact statevector simulation for the small gate set used by the loaders.

Bit order: qubit 0 is the least significant bit of the basis index, so
``i = sum_k q_k * 2**k`` and qubit ``n - 1`` is the MSB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .targets import DiscreteDistribution

GATE_KINDS = ("RY", "X", "CNOT", "CZ", "CRY", "CCRY", "MCRY")
ROTATION_KINDS = ("RY", "CRY", "CCRY", "MCRY")

# kind -> allowed number of controls
_ARITY = {"RY": (0, 0), "X": (0, 0), "CNOT": (1, 1), "CZ": (1, 1),
          "CRY": (1, 1), "CCRY": (2, 2), "MCRY": (1, 64)}


def ry_matrix(theta: float) -> np.ndarray:
    """2x2 real RY rotation ``[[cos t/2, -sin t/2], [sin t/2, cos t/2]]``."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Gate:
    """One gate. ``controls`` holds ``(qubit, required_bit)`` pairs.

    Rotation kinds carry either a fixed ``angle`` or a parameter ``param``
    slot, never both.
    """

    kind: str
    target: int
    controls: tuple[tuple[int, int], ...] = ()
    angle: float | None = None
    param: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        controls = tuple((int(q), int(b)) for q, b in self.controls)
        object.__setattr__(self, "controls", controls)
        lo, hi = _ARITY[self.kind]
        if not lo <= len(controls) <= hi:
            raise ValueError(f"{self.kind} takes {lo}..{hi} controls, got {len(controls)}")
        if any(b not in (0, 1) for _, b in controls):
            raise ValueError("control bits must be 0 or 1")
        if self.kind in ("CNOT", "CZ") and controls[0][1] != 1:
            raise ValueError(f"{self.kind} control must require bit 1")
        qubits = [self.target] + [q for q, _ in controls]
        if len(set(qubits)) != len(qubits) or min(qubits) < 0:
            raise ValueError(f"gate qubits must be distinct and nonnegative: {qubits}")
        if self.kind in ROTATION_KINDS:
            if (self.angle is None) == (self.param is None):
                raise ValueError("rotation gate needs exactly one of angle / param")
            if self.angle is not None and not math.isfinite(self.angle):
                raise ValueError("fixed angle must be finite")
            if self.param is not None and self.param < 0:
                raise ValueError("parameter slot must be nonnegative")
        elif self.angle is not None or self.param is not None:
            raise ValueError(f"{self.kind} takes no angle")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,) + tuple(q for q, _ in self.controls)

    def resolve_angle(self, params: Sequence[float] | None) -> float:
        if self.param is None:
            return float(self.angle)
        if params is None or self.param >= len(params):
            raise ValueError(f"parameter slot {self.param} not supplied")
        return float(params[self.param])


@dataclass
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...]
    num_params: int
    _program: _kernels.Program | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.gates = tuple(self.gates)
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        used = set()
        for g in self.gates:
            if max(g.qubits) >= self.num_qubits:
                raise ValueError(f"gate {g} touches qubit outside 0..{self.num_qubits - 1}")
            if g.param is not None:
                if g.param >= self.num_params:
                    raise ValueError(f"slot {g.param} >= num_params {self.num_params}")
                used.add(g.param)
        if used != set(range(self.num_params)):
            missing = sorted(set(range(self.num_params)) - used)
            raise ValueError(f"unreferenced parameter slots {missing}")

    def program(self) -> _kernels.Program:
        if self._program is None:
            self._program = _lower(self.num_qubits, self.gates)
        return self._program

    def count(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return out


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise ValueError(f"expected {1 << self.num_qubits} amplitudes, got {self.amplitudes.shape}")

    @classmethod
    def zero(cls, num_qubits: int) -> "StateVector":
        amps = np.zeros(1 << num_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


def _lower(num_qubits: int, gates: Sequence[Gate]) -> _kernels.Program:
    rows = []
    for g in gates:
        cmask = cval = 0
        for q, b in g.controls:
            cmask |= 1 << q
            cval |= b << q
        if g.kind in ROTATION_KINDS:
            op = _kernels.OP_ROTATE
        elif g.kind == "CZ":
            op = _kernels.OP_PHASE
        else:
            op = _kernels.OP_FLIP
        slot = -1 if g.param is None else g.param
        angle = 0.0 if g.angle is None else g.angle
        rows.append((op, g.target, cmask, cval, slot, angle))
    if not rows:
        return _kernels.make_program(num_qubits, [], [], [], [], [], [])
    return _kernels.make_program(num_qubits, *zip(*rows))


def _check_params(circuit: Circuit, params) -> np.ndarray:
    params = np.asarray(params if params is not None else [], dtype=np.float64).ravel()
    if params.shape[0] != circuit.num_params:
        raise ValueError(f"expected {circuit.num_params} parameters, got {params.shape[0]}")
    return params


def apply_gate(state: StateVector, gate: Gate, params=None) -> StateVector:
    """Return a new state with ``gate`` applied; the input is left untouched."""
    if max(gate.qubits) >= state.num_qubits:
        raise ValueError("gate touches a qubit outside the state")
    if gate.param is not None:
        angle = gate.resolve_angle(params)
        gate = Gate(gate.kind, gate.target, gate.controls, angle=angle)
    psi = state.amplitudes.copy()
    _kernels.run_program(_lower(state.num_qubits, [gate]), np.empty(0), psi)
    return StateVector(state.num_qubits, psi)


def simulate(circuit: Circuit, params=None, backend: str | None = None) -> StateVector:
    """Run ``circuit`` from |0...0> with the given angle vector."""
    params = _check_params(circuit, params)
    psi = np.zeros(1 << circuit.num_qubits, dtype=np.complex128)
    psi[0] = 1.0
    _kernels.run_program(circuit.program(), params, psi, backend=backend)
    return StateVector(circuit.num_qubits, psi)


def probabilities(state: StateVector) -> DiscreteDistribution:
    p = np.abs(state.amplitudes) ** 2
    return DiscreteDistribution(p / p.sum())


def sample_counts(dist, shots: int, seed: int | None = None) -> np.ndarray:
    """Multinomial shot counts drawn from ``dist``; reproducible for a fixed seed."""
    shots = int(shots)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = np.asarray(dist, dtype=np.float64)
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    return rng.multinomial(shots, p)


def _gate_matrix_full(gate: Gate, num_qubits: int, params) -> np.ndarray:
    # I - P_ctrl (x) I_t + P_ctrl (x) G_t, assembled with kron (MSB first)
    eye = np.eye(2)
    proj = {0: np.diag([1.0, 0.0]), 1: np.diag([0.0, 1.0])}
    if gate.kind in ROTATION_KINDS:
        local = ry_matrix(gate.resolve_angle(params))
    elif gate.kind == "CZ":
        local = np.diag([1.0, -1.0])
    else:
        local = np.array([[0.0, 1.0], [1.0, 0.0]])
    ctrl = dict(gate.controls)

    def kron_all(target_op):
        out = np.eye(1)
        for q in reversed(range(num_qubits)):
            if q == gate.target:
                op = target_op
            elif q in ctrl:
                op = proj[ctrl[q]]
            else:
                op = eye
            out = np.kron(out, op)
        return out

    dim = 1 << num_qubits
    return np.eye(dim) - kron_all(eye) + kron_all(local)


def circuit_unitary(circuit: Circuit, params=None) -> np.ndarray:
    """Dense 2^n x 2^n matrix of the whole circuit (for small n only)."""
    params = _check_params(circuit, params)
    u = np.eye(1 << circuit.num_qubits, dtype=np.complex128)
    for g in circuit.gates:
        u = _gate_matrix_full(g, circuit.num_qubits, params) @ u
    return u
