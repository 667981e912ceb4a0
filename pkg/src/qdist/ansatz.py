"""Circuit families for distribution loading and their angle constraints.

Families:

* ``symmetric``   fixed RY(pi/2) on the MSB, one RY per lower qubit, CNOT
  fan-out from the MSB. Mirror symmetric for every angle vector.
* ``asymmetric``  MSB rotation splitting a tail half and a peak half, with
  a CNOT mirror inside the peak half and a doubly-controlled fine-tune
  layer on one quarter.
* ``strong_skew`` as ``asymmetric`` but the mirror is centred on a lower
  pivot qubit.
* ``rycz``        hardware-efficient RY/CZ layers (baseline).
* ``grover_rudolph`` exact, parameter-free loader used as a reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sim import Circuit, Gate
from .targets import DiscreteDistribution

PI = math.pi
FAMILIES = ("symmetric", "asymmetric", "strong_skew", "rycz", "grover_rudolph")
WITNESS_SLACK = 1e-6


class InfeasibleConstraints(ValueError):
    pass


@dataclass
class ConstraintSet:
    """Linear constraints ``lower <= A @ theta <= upper`` plus a strictly
    feasible witness point."""

    A: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    witness: np.ndarray
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        self.witness = np.asarray(self.witness, dtype=np.float64)
        m, p = self.A.shape
        if self.lower.shape != (m,) or self.upper.shape != (m,) or self.witness.shape != (p,):
            raise ValueError("constraint arrays have inconsistent shapes")
        if np.any(self.lower > self.upper):
            raise InfeasibleConstraints("a constraint has lower > upper")
        if m and self.slack(self.witness) < WITNESS_SLACK:
            raise InfeasibleConstraints(
                f"witness slack {self.slack(self.witness):.3g} below {WITNESS_SLACK}")

    @property
    def num_params(self) -> int:
        return self.A.shape[1]

    def __len__(self) -> int:
        return self.A.shape[0]

    def slack(self, theta) -> float:
        """Smallest distance to a bound; negative when violated."""
        if len(self) == 0:
            return math.inf
        v = self.A @ np.asarray(theta, dtype=np.float64)
        return float(min(np.min(v - self.lower), np.min(self.upper - v)))

    def violation(self, theta) -> float:
        """Largest signed violation (<= 0 means feasible)."""
        return -self.slack(theta) if len(self) else -math.inf

    def satisfied(self, theta, tol: float = 1e-6) -> bool:
        return self.violation(theta) <= tol

    def rows(self):
        for i in range(len(self)):
            yield self.A[i], self.lower[i], self.upper[i]


class _Rows:
    def __init__(self, num_params: int):
        self.p = num_params
        self.A, self.lo, self.hi, self.labels = [], [], [], []

    def box(self, slot, lo, hi, label=""):
        self.diff(((slot, 1.0),), lo, hi, label)

    def diff(self, terms, lo, hi, label=""):
        row = np.zeros(self.p)
        for s, c in terms:
            row[s] = c
        self.A.append(row)
        self.lo.append(lo)
        self.hi.append(hi)
        self.labels.append(label)

    def build(self, witness) -> ConstraintSet:
        A = np.array(self.A) if self.A else np.zeros((0, self.p))
        return ConstraintSet(A, np.array(self.lo), np.array(self.hi), np.asarray(witness, float), self.labels)


def feasible_point(cs: ConstraintSet) -> np.ndarray:
    return cs.witness.copy()


# -- symmetric -----------------------------------------------------------------

def _descending(count: int, start: float = PI) -> list[float]:
    step = min(0.1 * PI, 0.4 * PI / max(count, 1))
    return [start - i * step for i in range(count)]


def _ordered_block(rows: _Rows, slots, lo, hi, descending: bool, name: str):
    """Box every slot and bound consecutive differences to [0, 2pi]."""
    for k, s in enumerate(slots):
        rows.box(s, lo, hi, f"{name}[{k}] box")
    for a, b in zip(slots, slots[1:]):
        if descending:
            rows.diff(((a, 1.0), (b, -1.0)), 0.0, 2 * PI, f"{name} {a}-{b} order")
        else:
            rows.diff(((b, 1.0), (a, -1.0)), 0.0, 2 * PI, f"{name} {b}-{a} order")


def build_symmetric(n: int) -> tuple[Circuit, ConstraintSet]:
    """Slot ``k`` drives qubit ``n - 2 - k``; the MSB angle is frozen at pi/2."""
    if n < 2:
        raise ValueError("symmetric family needs n >= 2")
    msb = n - 1
    gates = [Gate("RY", msb, angle=PI / 2)]
    gates += [Gate("RY", n - 2 - k, param=k) for k in range(n - 1)]
    gates += [Gate("CNOT", q, ((msb, 1),)) for q in range(n - 2, -1, -1)]
    rows = _Rows(n - 1)
    _ordered_block(rows, list(range(n - 1)), PI / 2, 5 * PI / 2, True, "sym")
    return Circuit(n, gates, n - 1), rows.build(_descending(n - 1))


# -- asymmetric / strong skew -------------------------------------------------

def _skewed(n: int, pivot: int, skew: str, fine_tune: str) -> tuple[Circuit, ConstraintSet]:
    if skew not in ("positive", "negative"):
        raise ValueError(f"skew must be positive or negative, got {skew!r}")
    if fine_tune not in ("00", "01"):
        raise ValueError(f"fine_tune must be '00' or '01', got {fine_tune!r}")
    msb, second = n - 1, n - 2
    lower = list(range(n - 2, -1, -1))  # q_{n-2} .. q_0
    tail = [1 + i for i in range(n - 1)]
    peak = [n + i for i in range(n - 1)]
    fine = [2 * n - 1 + i for i in range(n - 2)]
    nparams = 3 * n - 3

    pos = skew == "positive"
    peak_bit = 0 if pos else 1
    tail_bit = 1 - peak_bit
    ft_second = int(fine_tune[1]) if pos else 1 - int(fine_tune[1])

    gates = [Gate("RY", msb, param=0)]
    gates += [Gate("CRY", q, ((msb, peak_bit),), param=s) for q, s in zip(lower, peak)]
    gates += [Gate("CNOT", q, ((pivot, 1),)) for q in range(pivot - 1, -1, -1)]
    gates += [Gate("CCRY", q, ((msb, peak_bit), (second, ft_second)), param=s)
              for q, s in zip(lower[1:], fine)]
    gates += [Gate("CRY", q, ((msb, tail_bit),), param=s) for q, s in zip(lower, tail)]

    rows = _Rows(nparams)
    w = np.zeros(nparams)
    if pos:
        rows.box(0, -1.5 * PI, PI / 2, "msb")
        w[0] = PI / 3
    else:
        rows.box(0, PI / 2, 2.5 * PI, "msb")
        w[0] = 2 * PI / 3

    step = min(0.05 * PI, 0.19 * PI / max(n - 2, 1))
    rising = [0.30 * PI + i * step for i in range(n - 1)]
    if pos:
        _ordered_block(rows, tail, -1.5 * PI, PI / 2, False, "tail")
        w[tail] = rising
    else:
        _ordered_block(rows, tail, PI / 2, 2.5 * PI, True, "tail")
        w[tail] = [PI - a for a in rising]

    # peak half: qubits at or above the pivot are free, those below mirror
    free = [s for q, s in zip(lower, peak) if q >= pivot]
    mirrored = [s for q, s in zip(lower, peak) if q < pivot]
    for s in free:
        rows.box(s, -2 * PI, 2 * PI, "peak free")
        w[s] = PI / 2
    _ordered_block(rows, mirrored, PI / 2, 2.5 * PI, True, "peak")
    w[mirrored] = _descending(len(mirrored))

    for s in fine:
        rows.box(s, -2 * PI, 2 * PI, "fine")
    return Circuit(n, gates, nparams), rows.build(w)


def build_asymmetric(n: int, skew: str = "positive", fine_tune: str = "00"):
    """Slot layout: 0 = MSB angle, 1..n-1 tail CRYs (high to low qubit),
    n..2n-2 peak CRYs, 2n-1..3n-4 fine-tune CCRYs."""
    if n < 3:
        raise ValueError("asymmetric family needs n >= 3")
    return _skewed(n, n - 2, skew, fine_tune)


def build_strong_skew(n: int, pivot: int, skew: str = "positive", fine_tune: str = "00"):
    if n < 4:
        raise ValueError("strong-skew family needs n >= 4")
    if not 1 <= pivot <= n - 3:
        raise ValueError(f"pivot must be in 1..{n - 3}, got {pivot}")
    return _skewed(n, pivot, skew, fine_tune)


def auto_pivot(target, skew: str = "positive", strong: bool = True) -> int:
    """Qubit whose 0->1 boundary sits closest to the target's peak bin."""
    p = np.asarray(target, dtype=float)
    n = len(p).bit_length() - 1
    peak = int(np.argmax(p))
    if skew == "negative":
        peak = len(p) - 1 - peak
    hi = n - 3 if strong else n - 2
    if hi < 1:
        raise ValueError("too few qubits for a pivot")
    return min(range(1, hi + 1), key=lambda q: (abs(peak + 0.5 - 2**q), q))


# -- Ry-CZ baseline ------------------------------------------------------------

def cz_pairs(n: int, entanglement: str) -> list[tuple[int, int]]:
    if entanglement not in ("linear", "circular"):
        raise ValueError(f"entanglement must be linear or circular, got {entanglement!r}")
    pairs = [(q, q + 1) for q in range(n - 1)]
    if entanglement == "circular" and n > 2:
        pairs.append((n - 1, 0))
    return pairs


def build_rycz(n: int, layers: int = 1, entanglement: str = "linear"):
    if n < 2:
        raise ValueError("rycz family needs n >= 2")
    if layers < 1:
        raise ValueError("rycz family needs layers >= 1")
    pairs = cz_pairs(n, entanglement)
    gates = [Gate("RY", q, param=q) for q in range(n)]
    for layer in range(1, layers + 1):
        gates += [Gate("CZ", b, ((a, 1),)) for a, b in pairs]
        gates += [Gate("RY", q, param=layer * n + q) for q in range(n)]
    nparams = n * (layers + 1)
    rows = _Rows(nparams)
    for s in range(nparams):
        rows.box(s, 0.0, 4 * PI, "box")
    return Circuit(n, gates, nparams), rows.build(np.full(nparams, 2 * PI))


# -- Grover-Rudolph reference loader ------------------------------------------

def grover_rudolph_angles(target) -> list[np.ndarray]:
    """Per level k (qubit n-1-k), one angle per prefix of the k higher bits."""
    p = np.asarray(target, dtype=np.float64).ravel()
    m = len(p)
    if m < 2 or m & (m - 1):
        raise ValueError("target length must be a power of two >= 2")
    if np.any(p < 0) or not np.all(np.isfinite(p)) or p.sum() <= 0:
        raise ValueError("target must be nonnegative with positive mass")
    p = p / p.sum()
    n = m.bit_length() - 1
    levels = []
    for k in range(n):
        blocks = p.reshape(1 << k, 2, -1).sum(axis=2)
        levels.append(2 * np.arctan2(np.sqrt(blocks[:, 1]), np.sqrt(blocks[:, 0])))
    return levels


def build_grover_rudolph(target) -> Circuit:
    levels = grover_rudolph_angles(target)
    n = len(levels)
    msb = n - 1
    gates = [Gate("RY", msb, angle=float(levels[0][0]))]
    for k in range(1, n):
        q = msb - k
        for prefix, angle in enumerate(levels[k]):
            controls = tuple((msb - j, (prefix >> (k - 1 - j)) & 1) for j in range(k))
            kind = {1: "CRY", 2: "CCRY"}.get(k, "MCRY")
            gates.append(Gate(kind, q, controls, angle=float(angle)))
    return Circuit(n, gates, 0)


# -- specs and census ----------------------------------------------------------

@dataclass(frozen=True)
class AnsatzSpec:
    family: str
    num_qubits: int
    layers: int = 1
    entanglement: str = "linear"
    skew: str = "positive"
    pivot: int | None = None
    fine_tune: str = "00"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.num_qubits < 2 and self.family != "grover_rudolph":
            raise ValueError("num_qubits must be >= 2")
        if self.family == "rycz" and self.layers < 1:
            raise ValueError("layers must be >= 1")


def build(spec: AnsatzSpec, target=None) -> tuple[Circuit, ConstraintSet]:
    """Build any family; ``target`` is needed for grover_rudolph and auto pivot."""
    n = spec.num_qubits
    if spec.family == "symmetric":
        return build_symmetric(n)
    if spec.family == "asymmetric":
        return build_asymmetric(n, spec.skew, spec.fine_tune)
    if spec.family == "strong_skew":
        pivot = spec.pivot
        if pivot is None:
            if target is None:
                raise ValueError("strong_skew needs a pivot or a target to detect it from")
            if n < 4:
                raise ValueError("strong-skew family needs n >= 4")
            pivot = auto_pivot(target, spec.skew)
        return build_strong_skew(n, pivot, spec.skew, spec.fine_tune)
    if spec.family == "rycz":
        return build_rycz(n, spec.layers, spec.entanglement)
    if target is None:
        raise ValueError("grover_rudolph needs a target distribution")
    if len(target) != 1 << n:
        raise ValueError(f"target has {len(target)} bins, expected {1 << n}")
    circ = build_grover_rudolph(target)
    return circ, _Rows(0).build(np.zeros(0))


def expand_controls(circuit: Circuit) -> list[Gate]:
    """Rewrite control-on-0 as X sandwiches and cancel adjacent X pairs.

    Two X gates on a qubit cancel when no gate in between touches that qubit.
    """
    out: list[Gate | None] = []
    last_on: dict[int, int] = {}

    def push(g: Gate):
        if g.kind == "X" and not g.controls:
            j = last_on.get(g.target)
            if j is not None and out[j] is not None and out[j].kind == "X" and not out[j].controls:
                out[j] = None
                # the qubit's previous toucher is unknown now; rescan lazily
                last_on[g.target] = _previous_toucher(out, g.target, j)
                return
        out.append(g)
        for q in g.qubits:
            last_on[q] = len(out) - 1

    for g in circuit.gates:
        flips = [q for q, b in g.controls if b == 0]
        for q in flips:
            push(Gate("X", q))
        push(Gate(g.kind, g.target, tuple((q, 1) for q, _ in g.controls), g.angle, g.param))
        for q in flips:
            push(Gate("X", q))
    return [g for g in out if g is not None]


def _previous_toucher(out, qubit, before):
    for j in range(before - 1, -1, -1):
        if out[j] is not None and qubit in out[j].qubits:
            return j
    return None


@dataclass(frozen=True)
class GateCensus:
    counts: dict
    num_params: int

    def as_dict(self) -> dict:
        return {"counts": dict(sorted(self.counts.items())), "num_params": self.num_params}


def census_of(circuit: Circuit) -> GateCensus:
    counts: dict[str, int] = {}
    for g in expand_controls(circuit):
        counts[g.kind] = counts.get(g.kind, 0) + 1
    return GateCensus(counts, circuit.num_params)


def census(spec: AnsatzSpec, target=None) -> GateCensus:
    return census_of(build(spec, target)[0])


def census_formula(spec: AnsatzSpec, pivot: int | None = None) -> GateCensus:
    """Closed-form gate counts, independent of circuit construction."""
    n, l = spec.num_qubits, spec.layers
    if spec.family == "symmetric":
        return GateCensus({"RY": n, "CNOT": n - 1}, n - 1)
    if spec.family in ("asymmetric", "strong_skew"):
        piv = n - 2 if spec.family == "asymmetric" else (pivot if pivot is not None else spec.pivot)
        # X count: one sandwich on the MSB for each 0-controlled block, one on
        # the second qubit when the fine-tune layer needs it at 0
        pos = spec.skew == "positive"
        ft_zero = (spec.fine_tune == "00") == pos
        x = 2 + (2 if ft_zero else 0)
        counts = {"RY": 1, "CRY": 2 * (n - 1), "CCRY": n - 2, "X": x}
        if piv:
            counts["CNOT"] = piv
        return GateCensus(counts, 3 * n - 3)
    if spec.family == "rycz":
        per_layer = n if (spec.entanglement == "circular" and n > 2) else n - 1
        return GateCensus({"RY": n * (l + 1), "CZ": per_layer * l}, n * (l + 1))
    raise ValueError("grover_rudolph census depends on the target; use census()")
