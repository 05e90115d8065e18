"""Bootstrap evaluation and nonparametric method comparison.

The Wilcoxon signed-rank test uses an exact null distribution (dynamic
program over signed midrank sums) for n <= 25 and a tie-adjusted normal
approximation with continuity correction above that. The Friedman test
uses within-block midranks with the standard tie correction. Bootstrap
iterations are stratified so both classes stay represented, and the
resample indices depend only on (seed, iteration), so different methods
evaluated with the same seed form genuinely paired blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc, ndtr

from .errors import ConfigError, DataError
from .ml.evaluation import classification_metrics
from .rng import derive_rng

METRIC_NAMES = ("auc", "balanced_accuracy", "sensitivity", "specificity")


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------


@dataclass
class BootstrapResult:
    metric: str
    point_estimate: float
    values: np.ndarray  # one value per iteration
    resample_seed: int  # fingerprint for cross-method block alignment

    @property
    def n_iterations(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def ci(self) -> tuple[float, float]:
        lo, hi = np.percentile(self.values, [2.5, 97.5])
        return float(lo), float(hi)

    def to_dict(self) -> dict:
        lo, hi = self.ci
        return {
            "metric": self.metric,
            "point_estimate": self.point_estimate,
            "mean": self.mean,
            "ci_lo": lo,
            "ci_hi": hi,
            "n_iterations": self.n_iterations,
            "values": [float(v) for v in self.values],
            "resample_seed": self.resample_seed,
        }


def _resample_indices(labels: np.ndarray, seed: int, iteration: int,
                      fraction: float) -> np.ndarray:
    """Stratified with-replacement resample; depends only on (seed, i)."""
    rng = derive_rng(seed, "bootstrap", iteration)
    idx_parts = []
    for cls in (0, 1):
        rows = np.nonzero(labels == cls)[0]
        size = max(1, int(round(len(rows) * fraction)))
        idx_parts.append(rows[rng.integers(0, len(rows), size=size)])
    return np.concatenate(idx_parts)


def bootstrap_metrics(scores: np.ndarray, labels: np.ndarray, model_threshold: float,
                      n: int = 1000, seed: int = 0,
                      resample_fraction: float = 1.0) -> dict[str, BootstrapResult]:
    """Per-metric bootstrap distributions at the frozen decision threshold.

    resample_fraction = 1.0 is the standard full-size bootstrap; 0.1
    reproduces a literal "10% replacement" reading.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise DataError("bootstrap needs both classes present")
    if not 0.0 < resample_fraction <= 1.0:
        raise ConfigError("resample_fraction must lie in (0, 1]")
    point = classification_metrics(scores, labels, model_threshold)
    table = {m: np.empty(n) for m in METRIC_NAMES}
    for i in range(n):
        idx = _resample_indices(labels, seed, i, resample_fraction)
        metrics = classification_metrics(scores[idx], labels[idx], model_threshold)
        for m in METRIC_NAMES:
            table[m][i] = metrics[m]
    return {
        m: BootstrapResult(m, point[m], table[m], resample_seed=seed)
        for m in METRIC_NAMES
    }


# ---------------------------------------------------------------------------
# rank tests
# ---------------------------------------------------------------------------


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    sx = x[order]
    i = 0
    while i < len(sx):
        j = i
        while j + 1 < len(sx) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def chi2_sf(x: float, df: int) -> float:
    return float(gammaincc(df / 2.0, x / 2.0))


def friedman_test(table: np.ndarray) -> tuple[float, float]:
    """Friedman test over an (n_blocks, k_methods) table with midrank ties.

    Uses the tie-corrected statistic
    Q = (k - 1) * sum_j (R_j - n(k+1)/2)^2 / (A - n k (k+1)^2 / 4)
    with A the sum of squared ranks; fully tied tables give Q = 0, p = 1.
    """
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2:
        raise DataError("friedman_test expects a 2D table")
    n, k = table.shape
    if n < 2 or k < 2:
        raise DataError("friedman_test needs >= 2 blocks and >= 2 methods")
    ranks = np.vstack([_midranks(row) for row in table])
    col_sums = ranks.sum(axis=0)
    a = (ranks**2).sum()
    c = n * k * (k + 1) ** 2 / 4.0
    if a <= c:
        return 0.0, 1.0
    q = (k - 1) * ((col_sums - n * (k + 1) / 2.0) ** 2).sum() / (a - c)
    return float(q), chi2_sf(float(q), k - 1)


@dataclass
class WilcoxonResult:
    statistic: float  # W = min(W+, W-)
    pvalue: float
    n_effective: int
    degenerate: bool = False  # all paired differences were zero


def _wilcoxon_exact_p(w_obs: float, ranks: np.ndarray) -> float:
    """Two-sided exact p by DP over the signed-rank sum distribution.

    Midranks are half-integer, so everything is doubled onto an integer
    grid. The null distribution of W+ is symmetric, hence
    p = 2 * P(W+ <= min(W+, W-)), clamped to 1.
    """
    doubled = np.round(ranks * 2).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    w2 = int(round(w_obs * 2))
    p = 2.0 * counts[: w2 + 1].sum() / 2.0 ** len(ranks)
    return min(p, 1.0)


def wilcoxon_signed_rank(x: np.ndarray, y: np.ndarray,
                         exact_limit: int = 25) -> WilcoxonResult:
    """Paired two-sided Wilcoxon signed-rank test.

    Zero differences are dropped; |differences| are midranked. Exact
    enumeration for n <= exact_limit, otherwise a normal approximation
    with tie-adjusted variance and continuity correction.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError("wilcoxon needs paired samples of equal length")
    d = x - y
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, degenerate=True)
    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= exact_limit:
        return WilcoxonResult(w, _wilcoxon_exact_p(w, ranks), n)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= (tie_counts**3 - tie_counts).sum() / 48.0
    if var <= 0:
        return WilcoxonResult(w, 1.0, n, degenerate=True)
    z = (w - mean + 0.5) / np.sqrt(var)
    p = 2.0 * float(ndtr(z))
    return WilcoxonResult(w, min(p, 1.0), n)


def bonferroni_adjust(pvalues, m: int | None = None) -> list[float]:
    pvalues = list(pvalues)
    if any(not 0.0 <= p <= 1.0 for p in pvalues):
        raise DataError("p-values must lie in [0, 1]")
    m = len(pvalues) if m is None else m
    return [min(1.0, p * m) for p in pvalues]


# ---------------------------------------------------------------------------
# method comparison
# ---------------------------------------------------------------------------


@dataclass
class ComparisonResult:
    friedman: dict  # metric -> {"statistic", "pvalue"}
    pairwise: dict = field(default_factory=dict)
    # metric -> list of {"pair", "statistic", "pvalue", "pvalue_adjusted"}

    def to_dict(self) -> dict:
        return {"friedman": self.friedman, "pairwise": self.pairwise}


def compare_methods(method_results: dict[str, dict[str, BootstrapResult]],
                    alpha: float = 0.05) -> ComparisonResult:
    """Friedman over bootstrap iterations (blocks); on significance, all
    pairwise Wilcoxon tests with Bonferroni correction m = k(k-1)/2."""
    names = list(method_results)
    if len(names) < 2:
        raise DataError("compare_methods needs at least 2 methods")
    ref = method_results[names[0]]
    for name in names[1:]:
        for m in METRIC_NAMES:
            if method_results[name][m].n_iterations != ref[m].n_iterations:
                raise DataError("bootstrap iteration counts differ between methods")
            if method_results[name][m].resample_seed != ref[m].resample_seed:
                raise DataError(
                    "bootstrap seeds differ between methods; blocks are not aligned"
                )
    friedman: dict = {}
    pairwise: dict = {}
    n_pairs = len(names) * (len(names) - 1) // 2
    for metric in METRIC_NAMES:
        table = np.column_stack([method_results[n][metric].values for n in names])
        stat, p = friedman_test(table)
        friedman[metric] = {"statistic": stat, "pvalue": p}
        if p < alpha:
            rows = []
            for i in range(len(names)):
                for j in range(i + 1, len(names)):
                    res = wilcoxon_signed_rank(table[:, i], table[:, j])
                    rows.append(
                        {
                            "pair": [names[i], names[j]],
                            "statistic": res.statistic,
                            "pvalue": res.pvalue,
                        }
                    )
            adjusted = bonferroni_adjust([r["pvalue"] for r in rows], n_pairs)
            for row, adj in zip(rows, adjusted):
                row["pvalue_adjusted"] = adj
            pairwise[metric] = rows
    return ComparisonResult(friedman, pairwise)
