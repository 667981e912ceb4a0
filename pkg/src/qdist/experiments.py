"""Experiment runner and table aggregation behind the ``optimize``/``report`` commands."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import io
from .ansatz import AnsatzSpec, build, census_of
from .optimizer import OptimizationResult, OptimizerConfig, minimize
from .targets import DiscreteDistribution, TargetSpec, discretize

REPORT_HEADER = ["family", "qubits", "layers", "rel_entropy", "l2_sq", "ks_p", "ks_p_cdf", "n_runs"]
SUMMARY_HEADER = ["run", "family", "qubits", "layers", "seed", "rel_entropy", "l2_sq", "ks_p", "ks_p_cdf",
                  "best_loss", "evals_used"]


@dataclass(frozen=True)
class ExperimentConfig:
    ansatz: AnsatzSpec
    target: TargetSpec
    optimizer: OptimizerConfig
    target_dist: DiscreteDistribution | None = None  # overrides ``target`` (custom CSV)

    def distribution(self) -> DiscreteDistribution:
        return self.target_dist if self.target_dist is not None else discretize(self.target)

    @property
    def layers(self) -> str:
        return str(self.ansatz.layers) if self.ansatz.family == "rycz" else ""

    def run_name(self) -> str:
        tag = f"{self.ansatz.family}_q{self.ansatz.num_qubits}"
        if self.ansatz.family == "rycz":
            tag += f"_l{self.ansatz.layers}"
        return f"{tag}_s{self.optimizer.seed}"


def expand(base: ExperimentConfig, runs: int = 1, compare: bool = False) -> list[ExperimentConfig]:
    """Seed replicas of ``base`` plus, with ``compare``, Ry-CZ layers 1..3."""
    variants = [base.ansatz]
    if compare and base.ansatz.family != "rycz":
        variants += [AnsatzSpec("rycz", base.ansatz.num_qubits, layers=l,
                                entanglement=base.ansatz.entanglement) for l in (1, 2, 3)]
    out = []
    for spec in variants:
        for k in range(runs):
            out.append(replace(base, ansatz=spec,
                               optimizer=replace(base.optimizer, seed=base.optimizer.seed + k)))
    return out


def run_one(exp: ExperimentConfig, out_root) -> dict:
    target = exp.distribution()
    circuit, cs = build(exp.ansatz, target.probs)
    res = minimize(circuit, cs, target, exp.optimizer)
    run_dir = Path(out_root) / exp.run_name()
    run_dir.mkdir(parents=True, exist_ok=True)
    write_result(run_dir, exp, circuit, target, res)
    m = res.report
    return {"run": exp.run_name(), "family": exp.ansatz.family, "qubits": exp.ansatz.num_qubits,
            "layers": exp.layers, "seed": exp.optimizer.seed, "rel_entropy": m.relative_entropy,
            "l2_sq": m.l2_squared, "ks_p": m.ks_p_value, "ks_p_cdf": m.ks_p_value_cdf,
            "best_loss": res.best_loss, "evals_used": res.evals_used}


def write_result(run_dir: Path, exp: ExperimentConfig, circuit, target: DiscreteDistribution,
                 res: OptimizationResult) -> None:
    io.write_circuit(circuit, run_dir / "circuit.json")
    (run_dir / "params.json").write_text(io.dumps({
        "version": io.FORMAT_VERSION,
        "num_params": circuit.num_params,
        "params": [float(v) for v in res.best_params],
        "best_loss": res.best_loss,
        "evals_used": res.evals_used,
        "best_restart": res.best_restart,
        "constraint_violation": res.constraint_violation,
        "budget_exhausted": res.budget_exhausted,
    }))
    io.write_rows(run_dir / "loss_trace.csv", ["eval", "restart", "loss", "best_loss"],
                  _trace_rows(res))
    x = target.grid.x if target.grid is not None else np.arange(len(target), dtype=float)
    io.write_rows(run_dir / "distribution.csv", ["bin_index", "x_midpoint", "p_des", "p_gen"],
                  ((i, float(x[i]), float(target.probs[i]), float(res.generated[i]))
                   for i in range(len(target))))
    census = census_of(circuit).as_dict()
    (run_dir / "metrics.json").write_text(io.dumps({
        "version": io.FORMAT_VERSION,
        "family": exp.ansatz.family,
        "qubits": exp.ansatz.num_qubits,
        "layers": exp.layers,
        "target": exp.target.family,
        "seed": exp.optimizer.seed,
        "mode": exp.optimizer.mode,
        "metrics": res.report.as_dict(),
        "gate_counts": census["counts"],
    }))


def _trace_rows(res: OptimizationResult):
    best = np.inf
    last = -1
    for k, (r, f) in enumerate(zip(res.trace_restart, res.loss_trace)):
        if r != last:
            best, last = np.inf, r
        best = min(best, f)
        yield k, int(r), float(f), float(best)


def run_all(experiments: list[ExperimentConfig], out_root, jobs: int = 1) -> list[dict]:
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    if jobs > 1 and len(experiments) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_one, experiments, [out_root] * len(experiments)))
    else:
        rows = [run_one(e, out_root) for e in experiments]
    io.write_rows(out_root / "summary.csv", SUMMARY_HEADER,
                  ([row[h] for h in SUMMARY_HEADER] for row in rows))
    return rows


def collect(results_dir) -> list[dict]:
    found = []
    for path in sorted(Path(results_dir).rglob("metrics.json")):
        d = json.loads(path.read_text())
        m = d["metrics"]
        found.append({"family": d["family"], "qubits": int(d["qubits"]), "layers": str(d["layers"]),
                      "rel_entropy": m["relative_entropy"], "l2_sq": m["l2_squared"],
                      "ks_p": m["ks_p_value"], "ks_p_cdf": m.get("ks_p_value_cdf")})
    return found


def aggregate(records: list[dict]) -> list[list]:
    """Average runs per (family, qubits, layers), with run count."""
    groups = defaultdict(list)
    for r in records:
        groups[(r["family"], r["qubits"], r["layers"])].append(r)
    rows = []
    for (fam, q, l) in sorted(groups, key=lambda k: (k[1], k[0] == "rycz", k[0], k[2])):
        g = groups[(fam, q, l)]
        mean = {k: float(np.mean([r[k] if r[k] is not None else np.nan for r in g]))
                for k in ("rel_entropy", "l2_sq", "ks_p", "ks_p_cdf")}
        rows.append([fam, q, l, mean["rel_entropy"], mean["l2_sq"], mean["ks_p"], mean["ks_p_cdf"], len(g)])
    return rows


def write_report(results_dir, out_path) -> list[list]:
    records = collect(results_dir)
    if not records:
        raise FileNotFoundError(f"no metrics.json under {results_dir}")
    rows = aggregate(records)
    io.write_rows(out_path, REPORT_HEADER, rows)
    return rows


def read_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
