"""Rank-based tests for comparing accuracy samples.

Both tests use mid-ranks for ties and report two-sided p-values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Sequence

import numpy as np
from scipy.special import comb
from scipy.stats import chi2, norm, rankdata

ALPHA = 0.05
KRUSKAL_WALLIS = "KruskalWallis"
WILCOXON_RANKSUM = "WilcoxonRankSum"
EXACT_MAX_N = 10


@dataclass(frozen=True)
class StatResult:
    statistic: float
    p_value: float
    method: str
    exact: bool
    alpha: float = ALPHA

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha

    def to_dict(self) -> Dict[str, Any]:
        return {"statistic": self.statistic, "p_value": self.p_value, "method": self.method,
                "exact": self.exact, "alpha": self.alpha}


def _tie_sum(values: np.ndarray) -> float:
    """Sum of t**3 - t over groups of tied values."""
    _, counts = np.unique(values, return_counts=True)
    counts = counts.astype(np.float64)
    return float(np.sum(counts ** 3 - counts))


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> StatResult:
    """Kruskal-Wallis H with tie correction and chi-square p-value.

    If every value is identical the test has no information, so ``H = 0``
    and ``p = 1`` are returned instead of dividing by a zero correction.
    """
    arrays = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(arrays) < 2:
        raise ValueError("need at least two groups")
    if any(a.size == 0 for a in arrays):
        raise ValueError("every group must be nonempty")
    pooled = np.concatenate(arrays)
    if np.any(~np.isfinite(pooled)):
        raise ValueError("values must be finite")
    n = pooled.size
    ranks = rankdata(pooled)
    correction = 1.0 - _tie_sum(pooled) / (n ** 3 - n) if n > 1 else 0.0
    if correction <= 0:
        return StatResult(0.0, 1.0, KRUSKAL_WALLIS, False)
    bounds = np.cumsum([0] + [a.size for a in arrays])
    h = 0.0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        h += ranks[lo:hi].sum() ** 2 / (hi - lo)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    h = max(h / correction, 0.0)
    p = float(chi2.sf(h, len(arrays) - 1))
    return StatResult(float(h), min(max(p, 0.0), 1.0), KRUSKAL_WALLIS, False)


def ranksum_null_counts(n_a: int, n_b: int) -> np.ndarray:
    """Number of rank subsets giving each value ``u = 0 .. n_a * n_b`` of U.

    Counts subsets of size ``n_a`` of ``1..n_a+n_b`` by rank sum with a
    dynamic program over ranks; ``U = rank_sum - n_a (n_a + 1) / 2``.
    """
    n = n_a + n_b
    max_sum = sum(range(n - n_a + 1, n + 1))
    # table[j, s]: subsets of size j with sum s among the ranks seen so far
    table = np.zeros((n_a + 1, max_sum + 1), dtype=np.float64)
    table[0, 0] = 1.0
    for r in range(1, n + 1):
        table[1:, r:] += table[:-1, :max_sum + 1 - r].copy()
    offset = n_a * (n_a + 1) // 2
    return table[n_a, offset:offset + n_a * n_b + 1]


def _exact_two_sided(u: float, n_a: int, n_b: int) -> float:
    counts = ranksum_null_counts(n_a, n_b)
    total = comb(n_a + n_b, n_a, exact=True)
    k = int(round(u))
    lower = counts[:k + 1].sum() / total
    upper = counts[k:].sum() / total
    return float(min(1.0, 2.0 * min(lower, upper)))


def _normal_two_sided(u: float, n_a: int, n_b: int, tie_sum: float) -> float:
    n = n_a + n_b
    mean = n_a * n_b / 2.0
    var = n_a * n_b / 12.0 * ((n + 1) - tie_sum / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = max(abs(u - mean) - 0.5, 0.0) / np.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(z)))


def wilcoxon_ranksum(a: Sequence[float], b: Sequence[float], exact: bool | None = None) -> StatResult:
    """Two-sided Wilcoxon rank-sum test; the statistic is U of ``a``.

    Parameters
    ----------
    a, b : sequence of float
    exact : bool, optional
        Force the exact null distribution (only valid without ties) or the
        normal approximation. By default the exact distribution is used when
        both samples have at most 10 values and there are no ties.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    if np.any(~np.isfinite(pooled)):
        raise ValueError("values must be finite")
    ranks = rankdata(pooled)
    n_a, n_b = a.size, b.size
    u = float(ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0)
    ties = _tie_sum(pooled)
    if exact is None:
        exact = n_a <= EXACT_MAX_N and n_b <= EXACT_MAX_N and ties == 0
    if exact:
        if ties:
            raise ValueError("exact null distribution requires untied data")
        p = _exact_two_sided(u, n_a, n_b)
    else:
        p = _normal_two_sided(u, n_a, n_b, ties)
    return StatResult(u, p, WILCOXON_RANKSUM, bool(exact))
