"""Distribution distances and bootstrap helpers for experiment outputs."""

from __future__ import annotations

import numpy as np

__all__ = ["wasserstein2_1d", "ks_distance", "bootstrap_se", "bootstrap_ci"]


def _quantiles(sample: np.ndarray, k: int) -> np.ndarray:
    """Empirical quantile function at the k midpoint levels (i + 0.5)/k."""
    levels = (np.arange(k) + 0.5) / k
    return np.quantile(sample, levels, method="inverted_cdf")


def wasserstein2_1d(sample_a, sample_b) -> float:
    """W2 between two empirical measures via the sorted coupling.

    Both samples are resampled to the common size max(len(a), len(b)) by
    midpoint quantile interpolation; for equal sizes this reduces exactly to
    the optimal sorted pairing.
    """
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("wasserstein2_1d requires nonempty samples")
    k = max(a.size, b.size)
    qa = np.sort(a) if a.size == k else _quantiles(a, k)
    qb = np.sort(b) if b.size == k else _quantiles(b, k)
    return float(np.sqrt(np.mean((qa - qb) ** 2)))


def ks_distance(sample_a, sample_b) -> float:
    """Sup-norm distance between the two empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = np.sort(np.asarray(sample_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_distance requires nonempty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def bootstrap_se(values, gen: np.random.Generator, n_boot: int = 500) -> float:
    """Bootstrap standard error of the mean of ``values``."""
    v = np.asarray(values, dtype=float)
    idx = gen.integers(0, v.size, size=(n_boot, v.size))
    return float(np.std(v[idx].mean(axis=1), ddof=1))


def bootstrap_ci(statistic, samples: dict, gen: np.random.Generator,
                 n_boot: int = 500, level: float = 0.95) -> tuple[float, float]:
    """Percentile CI for ``statistic(**resampled samples)``.

    ``samples`` maps keyword names to 1-d arrays that are resampled with
    replacement, independently per array.
    """
    stats = np.empty(n_boot)
    for i in range(n_boot):
        draw = {k: v[gen.integers(0, len(v), size=len(v))]
                for k, v in samples.items()}
        stats[i] = statistic(**draw)
    lo = (1.0 - level) / 2.0
    return (float(np.quantile(stats, lo)), float(np.quantile(stats, 1.0 - lo)))
