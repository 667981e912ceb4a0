"""Compare the numba and numpy statevector kernels.

Run: python3 benchmarks/bench_kernels.py [--reps N]

Each case simulates one circuit family many times with fresh random
parameters, which is what the optimizer loop does. The numba kernel is
warmed up before timing so JIT compilation is excluded.
"""

import argparse
import time

import numpy as np

from qdist import _kernels
from qdist.ansatz import AnsatzSpec, build
from qdist.sim import simulate

CASES = [
    AnsatzSpec("symmetric", 6),
    AnsatzSpec("asymmetric", 5),
    AnsatzSpec("strong_skew", 6, pivot=3),
    AnsatzSpec("rycz", 6, layers=3),
    AnsatzSpec("rycz", 12, layers=3),
    AnsatzSpec("rycz", 16, layers=2),
]


def time_backend(circuit, params_list, backend):
    t0 = time.perf_counter()
    for p in params_list:
        simulate(circuit, p, backend=backend)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=2000)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba not importable; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'circuit':<28}{'reps':>6}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}{'max |diff|':>12}")
    for spec in CASES:
        circuit, cs = build(spec)
        reps = args.reps if spec.num_qubits <= 8 else max(20, args.reps // 50)
        params_list = [cs.witness + rng.uniform(-0.3, 0.3, cs.num_params) for _ in range(reps)]
        simulate(circuit, params_list[0], backend="numba")  # JIT warm-up
        t_np = time_backend(circuit, params_list, "numpy")
        t_nb = time_backend(circuit, params_list, "numba")
        diff = np.max(np.abs(simulate(circuit, params_list[-1], backend="numpy").amplitudes
                             - simulate(circuit, params_list[-1], backend="numba").amplitudes))
        name = f"{spec.family} n={spec.num_qubits}" + (f" l={spec.layers}" if spec.family == "rycz" else "")
        print(f"{name:<28}{reps:>6}{1e3 * t_np / reps:>11.4f}{1e3 * t_nb / reps:>11.4f}"
              f"{t_np / t_nb:>8.1f}x{diff:>12.2e}")


if __name__ == "__main__":
    main()
