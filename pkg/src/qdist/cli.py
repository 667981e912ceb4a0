"""Command-line entry point: ``qdist <command> [options]``.

Exit codes: 0 success, 2 invalid arguments, 3 infeasible constraints,
4 I/O failure. Errors are reported on one stderr line as
``error[<code>]: <message>``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .ansatz import FAMILIES, AnsatzSpec, InfeasibleConstraints, build, census_of
from .experiments import ExperimentConfig, expand, run_all, write_report
from .optimizer import METHODS, OptimizerConfig
from .sim import probabilities, sample_counts, simulate
from .targets import TargetSpec, discretize, load_csv, write_csv

EXIT_INVALID, EXIT_INFEASIBLE, EXIT_IO = 2, 3, 4

DEFAULT_DOMAINS = {"gaussian": (-10.0, 10.0), "lognormal": (0.0, 3.0), "chi2": (0.0, 20.0)}
DEFAULT_COEF = {"gaussian": 0.1, "lognormal": 2.0}

log = logging.getLogger("qdist")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail(EXIT_INVALID, "invalid-argument", message)


def _fail(code: int, kind: str, message) -> None:
    text = " ".join(str(message).split())
    print(f"error[{kind}]: {text}", file=sys.stderr)
    sys.exit(code)


def _default_seed() -> int:
    raw = os.environ.get("QDIST_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        _fail(EXIT_INVALID, "invalid-argument", f"QDIST_SEED must be an integer, got {raw!r}")


def _domain(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo,hi got {text!r}")
    return lo, hi


def _pivot(text: str):
    if text == "auto":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"pivot must be an integer or 'auto', got {text!r}")


def _add_ansatz_args(p):
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--entanglement", choices=("linear", "circular"), default="linear")
    p.add_argument("--skew", choices=("positive", "negative"), default="positive")
    p.add_argument("--pivot", type=_pivot, default=None, help="qubit index or 'auto'")
    p.add_argument("--fine-tune", choices=("00", "01"), default="00",
                   help="branch of the two top qubits that gets the fine-tune rotations")


def _add_target_args(p, required: bool):
    p.add_argument("--target", choices=("gaussian", "lognormal", "chi2", "custom"), required=required)
    p.add_argument("--target-file", help="CSV for --target custom")
    p.add_argument("--domain", type=_domain, help="lo,hi (defaults per family)")
    p.add_argument("--coef", type=float, help="exponent coefficient (gaussian/lognormal)")
    p.add_argument("--dof", type=float, default=4.0, help="chi-square degrees of freedom")


def _target(args, num_qubits: int):
    """Returns (TargetSpec, distribution) or (None, None) when no target given."""
    fam = args.target
    if fam is None:
        return None, None
    domain = args.domain or DEFAULT_DOMAINS.get(fam, (0.0, float(1 << num_qubits)))
    if fam == "custom":
        if not args.target_file:
            raise ValueError("--target custom needs --target-file")
        dist = load_csv(args.target_file, num_qubits, args.domain)
        if len(dist) != 1 << num_qubits:
            raise ValueError(f"custom target has {len(dist)} bins, expected {1 << num_qubits}")
        spec = TargetSpec("custom", num_qubits, dist.grid.domain, values=tuple(dist.probs))
        return spec, dist
    coef = args.dof if fam == "chi2" else (args.coef if args.coef is not None else DEFAULT_COEF[fam])
    spec = TargetSpec(fam, num_qubits, domain, coef)
    return spec, discretize(spec)


def _ansatz(args) -> AnsatzSpec:
    return AnsatzSpec(args.family, args.qubits, layers=args.layers, entanglement=args.entanglement,
                      skew=args.skew, pivot=args.pivot, fine_tune=args.fine_tune)


def cmd_build(args) -> None:
    spec = _ansatz(args)
    _, dist = _target(args, args.qubits)
    circuit, cs = build(spec, None if dist is None else dist.probs)
    if args.out:
        io.write_circuit(circuit, args.out)
    census = census_of(circuit)
    print(f"qubits {circuit.num_qubits}")
    print(f"params {census.num_params}")
    for kind, count in sorted(census.counts.items()):
        print(f"{kind} {count}")
    print(f"constraints {len(cs)}")


def cmd_targets(args) -> None:
    _, dist = _target(args, args.qubits)
    if args.out:
        write_csv(dist, args.out)
    else:
        for i, p in enumerate(dist.probs):
            print(f"{i},{dist.grid.x[i]:.12g},{p:.12g}")


def _load_circuit_and_params(args):
    circuit = io.read_circuit(args.circuit)
    params = io.read_params(args.params) if args.params else np.zeros(0)
    if len(params) != circuit.num_params:
        raise ValueError(f"circuit needs {circuit.num_params} parameters, file has {len(params)}")
    return circuit, params


def cmd_simulate(args) -> None:
    circuit, params = _load_circuit_and_params(args)
    state = simulate(circuit, params)
    probs = probabilities(state).probs
    rows = ((i, format(i, f"0{circuit.num_qubits}b"), float(state.amplitudes[i].real) + 0.0,
             float(state.amplitudes[i].imag) + 0.0, float(probs[i])) for i in range(len(probs)))
    header = ["bin_index", "state", "amp_re", "amp_im", "probability"]
    if args.out:
        io.write_rows(args.out, header, rows)
    else:
        print(",".join(header))
        for r in rows:
            print(",".join(io.fmt_csv(v) if isinstance(v, float) else str(v) for v in r))


def cmd_sample(args) -> None:
    circuit, params = _load_circuit_and_params(args)
    probs = probabilities(simulate(circuit, params)).probs
    counts = sample_counts(probs, args.shots, args.seed)
    io.write_counts(args.out, counts, circuit.num_qubits)


def cmd_export_qasm(args) -> None:
    circuit, params = _load_circuit_and_params(args)
    text = io.to_qasm(circuit, params)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_optimize(args) -> None:
    spec = _ansatz(args)
    tspec, dist = _target(args, args.qubits)
    cfg = OptimizerConfig(method=args.method, max_evals=args.max_evals, initial_step=args.initial_step,
                          restarts=args.restarts, seed=args.seed, mode=args.mode, shots=args.shots)
    base = ExperimentConfig(spec, tspec, cfg, target_dist=dist if tspec.family == "custom" else None)
    if args.runs < 1:
        raise ValueError("--runs must be >= 1")
    rows = run_all(expand(base, args.runs, args.compare), args.out, args.jobs)
    for r in rows:
        print(f"{r['run']} rel_entropy={r['rel_entropy']:.6g} l2_sq={r['l2_sq']:.6g} "
              f"ks_p={r['ks_p']:.4g} ks_p_cdf={r['ks_p_cdf']:.4g}")


def cmd_report(args) -> None:
    out = args.out or str(Path(args.results) / "report.csv")
    rows = write_report(args.results, out)
    print(f"{len(rows)} rows -> {out}")


def make_parser() -> argparse.ArgumentParser:
    seed = _default_seed()
    p = _Parser(prog="qdist", description="Load probability distributions into small quantum circuits.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="construct a circuit and print its gate census")
    _add_ansatz_args(b)
    _add_target_args(b, required=False)
    b.add_argument("--out", help="circuit JSON path")
    b.set_defaults(func=cmd_build)

    t = sub.add_parser("targets", help="discretise a target distribution")
    t.add_argument("--qubits", type=int, required=True)
    _add_target_args(t, required=True)
    t.add_argument("--out")
    t.set_defaults(func=cmd_targets)

    for name, func, doc in (("simulate", cmd_simulate, "exact amplitudes and probabilities"),
                            ("export-qasm", cmd_export_qasm, "write OpenQASM 2.0")):
        s = sub.add_parser(name, help=doc)
        s.add_argument("--circuit", required=True)
        s.add_argument("--params")
        s.add_argument("--out")
        s.set_defaults(func=func)

    s = sub.add_parser("sample", help="shot counts from a circuit")
    s.add_argument("--circuit", required=True)
    s.add_argument("--params")
    s.add_argument("--shots", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    o = sub.add_parser("optimize", help="fit circuit angles to a target")
    _add_ansatz_args(o)
    _add_target_args(o, required=True)
    o.add_argument("--method", choices=METHODS, default="cobyla")
    o.add_argument("--mode", choices=("exact", "shots"), default="exact")
    o.add_argument("--shots", type=int, default=10_000)
    o.add_argument("--seed", type=int, default=seed)
    o.add_argument("--restarts", type=int, default=5)
    o.add_argument("--max-evals", type=int, default=2000)
    o.add_argument("--initial-step", type=float, default=0.5)
    o.add_argument("--runs", type=int, default=1, help="seed replicas (seed, seed+1, ...)")
    o.add_argument("--compare", action="store_true", help="also run Ry-CZ with layers 1, 2, 3")
    o.add_argument("--jobs", type=int, default=1)
    o.add_argument("--out", required=True, help="results directory")
    o.set_defaults(func=cmd_optimize)

    r = sub.add_parser("report", help="aggregate result directories into a table")
    r.add_argument("results")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except InfeasibleConstraints as exc:
        _fail(EXIT_INFEASIBLE, "infeasible", exc)
    except (OSError, KeyError) as exc:
        _fail(EXIT_IO, "io", exc)
    except ValueError as exc:
        _fail(EXIT_INVALID, "invalid-argument", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
