"""Target distributions discretised onto 2^n equal-width bins."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FAMILIES = ("gaussian", "lognormal", "chi2", "custom")


@dataclass(frozen=True)
class Grid:
    num_qubits: int
    domain: tuple[float, float]
    x: np.ndarray  # bin midpoints


@dataclass
class DiscreteDistribution:
    """2^n nonnegative probabilities summing to one, plus optional grid."""

    probs: np.ndarray
    grid: Grid | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64).ravel()
        n = len(p)
        if n == 0 or n & (n - 1):
            raise ValueError(f"length must be a power of two, got {n}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        self.probs = p

    @classmethod
    def from_weights(cls, weights, grid: Grid | None = None) -> "DiscreteDistribution":
        w = np.asarray(weights, dtype=np.float64).ravel()
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights sum to zero")
        return cls(w / total, grid)

    @property
    def num_qubits(self) -> int:
        return len(self.probs).bit_length() - 1

    def __len__(self) -> int:
        return len(self.probs)

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)


@dataclass(frozen=True)
class TargetSpec:
    """``coef`` is the Gaussian/log-normal exponent coefficient or the chi2 dof."""

    family: str
    num_qubits: int
    domain: tuple[float, float]
    coef: float = 1.0
    values: tuple[float, ...] | None = None  # custom family only

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown target family {self.family!r}")
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        lo, hi = self.domain
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"bad domain {self.domain}")
        if self.family == "chi2" and self.coef < 1:
            raise ValueError("chi-square degrees of freedom must be >= 1")
        if self.family in ("gaussian", "lognormal") and not self.coef > 0:
            raise ValueError("exponent coefficient must be positive")
        if self.family == "custom":
            if self.values is None or len(self.values) != 1 << self.num_qubits:
                raise ValueError(f"custom target needs {1 << self.num_qubits} values")


def midpoints(num_qubits: int, domain) -> np.ndarray:
    lo, hi = domain
    m = 1 << num_qubits
    return lo + (np.arange(m) + 0.5) * (hi - lo) / m


def density(family: str, x: np.ndarray, coef: float) -> np.ndarray:
    """Unnormalised kernels, taken literally: exp(-a x^2), exp(-b ln(x)^2), x^(k/2-1) exp(-x/2)."""
    if family == "gaussian":
        return np.exp(-coef * x**2)
    if family == "lognormal":
        if np.any(x <= 0):
            raise ValueError("log-normal kernel needs all bin midpoints > 0")
        return np.exp(-coef * np.log(x) ** 2)
    if family == "chi2":
        if np.any(x <= 0):
            raise ValueError("chi-square kernel needs all bin midpoints > 0")
        return x ** (coef / 2 - 1) * np.exp(-x / 2)
    raise ValueError(f"no closed-form density for {family!r}")


def discretize(spec: TargetSpec) -> DiscreteDistribution:
    x = midpoints(spec.num_qubits, spec.domain)
    grid = Grid(spec.num_qubits, tuple(spec.domain), x)
    if spec.family == "custom":
        w = np.asarray(spec.values, dtype=np.float64)
    else:
        w = density(spec.family, x, spec.coef)
    return DiscreteDistribution.from_weights(w, grid)


def load_csv(path, num_qubits: int | None = None, domain=None) -> DiscreteDistribution:
    """Load a custom target.

    Accepted layouts: one probability column of length 2^n (used as given,
    after normalisation), ``x,density`` pairs, or the three-column
    ``bin_index,x_midpoint,p`` file written by :func:`write_csv`. The pairs are
    linearly interpolated at the bin midpoints when ``num_qubits`` and
    ``domain`` are given, otherwise used verbatim in file order.
    """
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                if rows:
                    raise
                continue  # header
    if not rows:
        raise ValueError(f"{path}: no numeric rows")
    width = {len(r) for r in rows}
    if width == {1}:
        w = np.array([r[0] for r in rows])
        n = len(w).bit_length() - 1
        if num_qubits is not None and n != num_qubits or len(w) != 1 << n:
            raise ValueError(f"{path}: expected 2^n rows, got {len(w)}")
        lo, hi = domain if domain is not None else (0.0, float(len(w)))
        return DiscreteDistribution.from_weights(w, Grid(n, (lo, hi), midpoints(n, (lo, hi))))
    if width == {3}:
        rows = [r[1:] for r in rows]
        width = {2}
    if width == {2}:
        arr = np.array(rows)
        xs, ws = arr[:, 0], arr[:, 1]
        if num_qubits is not None and domain is not None:
            order = np.argsort(xs)
            x = midpoints(num_qubits, domain)
            w = np.interp(x, xs[order], ws[order], left=0.0, right=0.0)
            return DiscreteDistribution.from_weights(w, Grid(num_qubits, tuple(domain), x))
        n = len(ws).bit_length() - 1
        if len(ws) != 1 << n:
            raise ValueError(f"{path}: expected 2^n rows, got {len(ws)}")
        return DiscreteDistribution.from_weights(ws, Grid(n, (float(xs[0]), float(xs[-1])), xs))
    raise ValueError(f"{path}: expected 1, 2 or 3 columns")


def write_csv(dist: DiscreteDistribution, path) -> None:
    x = dist.grid.x if dist.grid is not None else np.arange(len(dist), dtype=float)
    with open(Path(path), "w", newline="") as fh:
        fh.write("bin_index,x_midpoint,p\n")
        for i, (xi, pi) in enumerate(zip(x, dist.probs)):
            fh.write(f"{i},{xi:.12g},{pi:.12g}\n")
