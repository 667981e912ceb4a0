"""Distribution comparison metrics: relative entropy, squared L2, two-sample KS."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

EPS = 1e-12
DEFAULT_KS_SAMPLES = 10_000


@dataclass(frozen=True)
class MetricsReport:
    relative_entropy: float
    l2_squared: float
    ks_statistic: float
    ks_p_value: float
    ks_statistic_cdf: float = float("nan")
    ks_p_value_cdf: float = float("nan")
    shots_used: int | None = None  # None: exact probabilities

    def as_dict(self) -> dict:
        return asdict(self)


def _pair(p_des, p_gen) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p_des, dtype=np.float64).ravel()
    q = np.asarray(p_gen, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    return p, q


def relative_entropy(p_des, p_gen, eps: float = EPS) -> float:
    """KL divergence D(p_des || p_gen) in nats, with p_gen floored at ``eps``."""
    p, q = _pair(p_des, p_gen)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / np.maximum(q[mask], eps))))


def l2_squared(p_des, p_gen) -> float:
    p, q = _pair(p_des, p_gen)
    return float(np.sum((q - p) ** 2))


def kolmogorov_sf(lam: float, tol: float = 1e-12) -> float:
    """Asymptotic Kolmogorov survival function Q(lam) = 2 sum (-1)^(k-1) exp(-2 k^2 lam^2).

    For small ``lam`` the alternating series converges slowly, so the
    equivalent theta-function form of the CDF is summed instead.
    """
    if lam <= 0:
        return 1.0
    if lam < 0.3:
        # 1 - sqrt(2 pi)/lam * sum exp(-(2k-1)^2 pi^2 / (8 lam^2))
        total, k = 0.0, 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * lam * lam))
            total += term
            if term < tol:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * total))
    total, k = 0.0, 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_from_cdfs(cdf_a: np.ndarray, cdf_b: np.ndarray, m: int, n: int) -> tuple[float, float]:
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    return d, kolmogorov_sf(d * math.sqrt(m * n / (m + n)))


def ks_test(p_des, p_gen, samples_per_side: int = DEFAULT_KS_SAMPLES, seed: int | None = 0,
            exact: bool = False) -> tuple[float, float]:
    """Two-sample KS statistic and asymptotic p-value.

    The sampled variant draws ``samples_per_side`` bin indices from each
    distribution. ``exact=True`` compares the two CDFs directly and uses
    ``samples_per_side`` only as the nominal sample size.
    """
    if samples_per_side < 100:
        raise ValueError("samples_per_side must be >= 100")
    p, q = _pair(p_des, p_gen)
    p = p / p.sum()
    q = q / q.sum()
    m = samples_per_side
    if exact:
        return ks_from_cdfs(np.cumsum(p), np.cumsum(q), m, m)
    rng = np.random.default_rng(seed)
    a = rng.multinomial(m, p)
    b = rng.multinomial(m, q)
    return ks_from_cdfs(np.cumsum(a) / m, np.cumsum(b) / m, m, m)


def report(p_des, p_gen, samples_per_side: int = DEFAULT_KS_SAMPLES, seed: int | None = 0,
           shots_used: int | None = None) -> MetricsReport:
    """All metrics; KS is given both sampled and straight from the two CDFs."""
    d, pv = ks_test(p_des, p_gen, samples_per_side, seed)
    d_cdf, pv_cdf = ks_test(p_des, p_gen, samples_per_side, exact=True)
    return MetricsReport(
        relative_entropy=relative_entropy(p_des, p_gen),
        l2_squared=l2_squared(p_des, p_gen),
        ks_statistic=d,
        ks_p_value=pv,
        ks_statistic_cdf=d_cdf,
        ks_p_value_cdf=pv_cdf,
        shots_used=shots_used,
    )
