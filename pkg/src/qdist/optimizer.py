"""Classical half of the variational loop: constrained derivative-free fitting.

Each evaluation simulates the circuit, turns the state into a distribution
(exactly, or through seeded shot sampling) and scores it with the squared
L2 distance to the target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sopt

from . import metrics
from .ansatz import ConstraintSet, InfeasibleConstraints
from .sim import Circuit, probabilities, sample_counts, simulate

log = logging.getLogger(__name__)

METHODS = ("cobyla", "nelder_mead")
MODES = ("exact", "shots")
FEAS_TOL = 1e-6


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "cobyla"
    max_evals: int = 2000  # per restart
    initial_step: float = 0.5
    convergence_tol: float = 1e-8
    stall_evals: int = 50
    restarts: int = 5
    seed: int = 0
    mode: str = "exact"
    shots: int = 10_000
    ks_samples: int = metrics.DEFAULT_KS_SAMPLES

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.max_evals < 1 or self.restarts < 1:
            raise ValueError("max_evals and restarts must be >= 1")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.mode == "shots" and self.shots < 1:
            raise ValueError("shots must be >= 1")


@dataclass
class OptimizationResult:
    best_params: np.ndarray
    best_loss: float
    loss_trace: np.ndarray
    trace_restart: np.ndarray
    evals_used: int
    constraint_violation: float
    report: metrics.MetricsReport
    best_restart: int = 0
    budget_exhausted: bool = False
    generated: np.ndarray = field(default=None, repr=False)


def generated_distribution(circuit: Circuit, params, mode: str = "exact", shots: int = 10_000,
                           seed=None) -> np.ndarray:
    probs = probabilities(simulate(circuit, params)).probs
    if mode == "exact":
        return probs
    return sample_counts(probs, shots, seed) / shots


def loss(circuit: Circuit, params, target, mode: str = "exact", shots: int = 10_000, seed=None) -> float:
    """Squared L2 distance between generated and target distributions."""
    gen = generated_distribution(circuit, params, mode, shots, seed)
    return metrics.l2_squared(target, gen)


class _Tracker:
    """Counts evaluations, keeps the best feasible point, enforces stopping rules.

    Once a stopping rule fires the tracker stops simulating and returns a
    frozen value, so the underlying solver winds down on its own without an
    exception crossing its callback boundary.
    """

    def __init__(self, fn, cs: ConstraintSet, cfg: OptimizerConfig):
        self.fn, self.cs, self.cfg = fn, cs, cfg
        self.losses: list[float] = []
        self.best_x: np.ndarray | None = None
        self.best_f = np.inf
        self._ref = np.inf
        self._stalled = 0
        self.stopped = False
        self.exhausted = False

    def __call__(self, x) -> float:
        if self.stopped:
            return self.best_f
        x = np.array(x, dtype=np.float64)
        f = self.fn(x, len(self.losses))
        self.losses.append(f)
        if f < self.best_f and self.cs.violation(x) <= FEAS_TOL:
            self.best_f, self.best_x = f, x
        if self.best_f < self._ref - self.cfg.convergence_tol:
            self._ref = self.best_f
            self._stalled = 0
        else:
            self._stalled += 1
            if self._stalled >= self.cfg.stall_evals:
                self.stopped = True
        if len(self.losses) >= self.cfg.max_evals:
            self.stopped = self.exhausted = True
        return f


def _start_point(cs: ConstraintSet, cfg: OptimizerConfig, rng: np.random.Generator) -> np.ndarray:
    w = cs.witness
    jitter = rng.uniform(-0.5 * cfg.initial_step, 0.5 * cfg.initial_step, size=w.shape)
    # shrink the jitter toward the witness until strictly feasible
    t = 1.0
    for _ in range(60):
        x = w + t * jitter
        if cs.slack(x) > 0:
            return x
        t *= 0.5
    return w.copy()


def _run_cobyla(track: _Tracker, x0, cs: ConstraintSet, cfg: OptimizerConfig):
    A, lo, hi = cs.A, cs.lower, cs.upper
    cons = [{"type": "ineq", "fun": lambda x: np.concatenate((A @ x - lo, hi - A @ x)),
             "jac": lambda x: np.vstack((A, -A))}] if len(cs) else []
    sopt.minimize(track, x0, method="COBYLA", constraints=cons,
                  options={"rhobeg": cfg.initial_step, "maxiter": cfg.max_evals, "tol": 1e-7})


def _run_nelder_mead(track: _Tracker, x0, cs: ConstraintSet, cfg: OptimizerConfig):
    weight = 10.0
    x = np.array(x0, dtype=np.float64)
    while True:
        def penalised(z, w=weight):
            v = cs.A @ z
            over = np.maximum(cs.lower - v, 0.0) + np.maximum(v - cs.upper, 0.0)
            return track(z) + w * float(over @ over)

        simplex = np.vstack([x] + [x + cfg.initial_step * e for e in np.eye(len(x))])
        res = sopt.minimize(penalised, x, method="Nelder-Mead",
                            options={"initial_simplex": simplex, "maxfev": cfg.max_evals,
                                     "xatol": 1e-8, "fatol": cfg.convergence_tol})
        x = res.x
        if track.stopped or cs.violation(x) <= FEAS_TOL:
            return
        weight *= 2.0


def minimize(circuit: Circuit, constraints: ConstraintSet, target, config: OptimizerConfig | None = None
             ) -> OptimizationResult:
    """Best-of-restarts constrained fit of ``circuit`` angles to ``target``."""
    cfg = config or OptimizerConfig()
    target = np.asarray(target, dtype=np.float64)
    if constraints.num_params != circuit.num_params:
        raise ValueError(f"constraints cover {constraints.num_params} params, circuit has {circuit.num_params}")
    if len(target) != 1 << circuit.num_qubits:
        raise ValueError(f"target has {len(target)} bins, circuit produces {1 << circuit.num_qubits}")
    if len(constraints) and constraints.slack(constraints.witness) <= 0:
        raise InfeasibleConstraints("witness point is not feasible")

    runs = []
    for r in range(cfg.restarts):
        if cfg.mode == "exact":
            def fn(x, k):
                return loss(circuit, x, target)
        else:
            def fn(x, k, r=r):
                seed = np.random.SeedSequence([cfg.seed, r, k])
                return loss(circuit, x, target, "shots", cfg.shots, np.random.default_rng(seed))

        track = _Tracker(fn, constraints, cfg)
        rng = np.random.default_rng([cfg.seed, r])
        x0 = _start_point(constraints, cfg, rng)
        if circuit.num_params == 0:
            track(x0)
        elif cfg.method == "cobyla":
            _run_cobyla(track, x0, constraints, cfg)
        else:
            _run_nelder_mead(track, x0, constraints, cfg)
        log.debug("restart %d: %d evals, best %.6g", r, len(track.losses), track.best_f)
        runs.append(track)

    best_r = min(range(len(runs)), key=lambda i: runs[i].best_f)
    best = runs[best_r]
    gen = probabilities(simulate(circuit, best.best_x)).probs
    rep = metrics.report(target, gen, cfg.ks_samples, cfg.seed,
                         shots_used=cfg.shots if cfg.mode == "shots" else None)
    return OptimizationResult(
        best_params=best.best_x,
        best_loss=float(best.best_f),
        loss_trace=np.concatenate([np.asarray(t.losses) for t in runs]),
        trace_restart=np.concatenate([np.full(len(t.losses), i) for i, t in enumerate(runs)]),
        evals_used=sum(len(t.losses) for t in runs),
        constraint_violation=float(constraints.violation(best.best_x)) if len(constraints) else 0.0,
        report=rep,
        best_restart=best_r,
        budget_exhausted=any(t.exhausted for t in runs),
        generated=gen,
    )
