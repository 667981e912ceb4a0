"""Statevector update kernels.

Two interchangeable implementations of the same gate loop live here: a
numba ``@njit`` kernel and a vectorised numpy path. The numba path is used
when numba imports and ``QDIST_DISABLE_NUMBA`` is unset (or ``0``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

OP_ROTATE = 0
OP_FLIP = 1
OP_PHASE = 2

_FALSY = {"", "0", "false", "no", "off"}

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and os.environ.get("QDIST_DISABLE_NUMBA", "").strip().lower() in _FALSY
BACKEND = "numba" if NUMBA_ENABLED else "numpy"


@dataclass
class Program:
    """A circuit lowered to flat arrays, one entry per gate.

    ``cmask``/``cval`` select the basis indices a gate acts on:
    ``(i & cmask) == cval``. ``slot`` is -1 for fixed-angle gates.
    """

    num_qubits: int
    op: np.ndarray
    target: np.ndarray
    cmask: np.ndarray
    cval: np.ndarray
    slot: np.ndarray
    angle: np.ndarray
    _index_cache: list | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.op.shape[0])

    def index_pairs(self) -> list[np.ndarray]:
        # numpy path only: basis indices with target bit 0 and matching controls
        if self._index_cache is None:
            idx = np.arange(1 << self.num_qubits, dtype=np.int64)
            cache = []
            for g in range(len(self)):
                tbit = np.int64(1) << self.target[g]
                sel = ((idx & self.cmask[g]) == self.cval[g])
                if self.op[g] == OP_PHASE:
                    sel &= (idx & tbit) != 0
                else:
                    sel &= (idx & tbit) == 0
                cache.append(idx[sel])
            self._index_cache = cache
        return self._index_cache


def make_program(num_qubits, op, target, cmask, cval, slot, angle) -> Program:
    return Program(
        num_qubits=num_qubits,
        op=np.asarray(op, dtype=np.int8),
        target=np.asarray(target, dtype=np.int64),
        cmask=np.asarray(cmask, dtype=np.int64),
        cval=np.asarray(cval, dtype=np.int64),
        slot=np.asarray(slot, dtype=np.int64),
        angle=np.asarray(angle, dtype=np.float64),
    )


def run_numpy(program: Program, params: np.ndarray, psi: np.ndarray) -> None:
    """Apply every gate of ``program`` to ``psi`` in place (numpy path)."""
    pairs = program.index_pairs()
    for g in range(len(program)):
        i0 = pairs[g]
        op = program.op[g]
        if op == OP_PHASE:
            psi[i0] = -psi[i0]
            continue
        i1 = i0 | (np.int64(1) << program.target[g])
        if op == OP_FLIP:
            psi[i0], psi[i1] = psi[i1], psi[i0]
            continue
        s_ = program.slot[g]
        theta = program.angle[g] if s_ < 0 else params[s_]
        c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
        a0 = psi[i0]
        a1 = psi[i1]
        psi[i0] = c * a0 - s * a1
        psi[i1] = s * a0 + c * a1


if HAVE_NUMBA:

    @njit(cache=True)
    def _run_numba(op, target, cmask, cval, slot, angle, params, psi):
        dim = psi.shape[0]
        for g in range(op.shape[0]):
            tbit = np.int64(1) << target[g]
            m = cmask[g]
            v = cval[g]
            kind = op[g]
            if kind == OP_ROTATE:
                theta = angle[g] if slot[g] < 0 else params[slot[g]]
                c = np.cos(0.5 * theta)
                s = np.sin(0.5 * theta)
                for i in range(dim):
                    if (i & tbit) == 0 and (i & m) == v:
                        j = i | tbit
                        a0 = psi[i]
                        a1 = psi[j]
                        psi[i] = c * a0 - s * a1
                        psi[j] = s * a0 + c * a1
            elif kind == OP_FLIP:
                for i in range(dim):
                    if (i & tbit) == 0 and (i & m) == v:
                        j = i | tbit
                        tmp = psi[i]
                        psi[i] = psi[j]
                        psi[j] = tmp
            else:
                for i in range(dim):
                    if (i & tbit) != 0 and (i & m) == v:
                        psi[i] = -psi[i]

    def run_numba(program: Program, params: np.ndarray, psi: np.ndarray) -> None:
        """Apply every gate of ``program`` to ``psi`` in place (numba path)."""
        _run_numba(program.op, program.target, program.cmask, program.cval,
                   program.slot, program.angle, params, psi)

else:  # pragma: no cover
    run_numba = None


def run_program(program: Program, params, psi: np.ndarray, backend: str | None = None) -> None:
    backend = backend or BACKEND
    params = np.ascontiguousarray(params, dtype=np.float64)
    if backend == "numba":
        if run_numba is None:
            raise RuntimeError("numba backend requested but numba is not importable")
        run_numba(program, params, psi)
    elif backend == "numpy":
        run_numpy(program, params, psi)
    else:
        raise ValueError(f"unknown backend {backend!r}")
