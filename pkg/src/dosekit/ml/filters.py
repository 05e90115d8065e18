"""Feature-analysis filters: stability (ICC over ROI perturbations),
discriminative power (Mann-Whitney U), and redundancy removal
(greedy Spearman)."""

from __future__ import annotations

import numpy as np
from scipy.stats import mannwhitneyu, spearmanr

from ..errors import DataError
from ..features import FeatureMatrix


def icc_agreement(table: np.ndarray) -> float:
    """Two-way random-effects, absolute-agreement, single-measurement ICC.

    ``table`` is (n_subjects, k_raters); raters here are the ROI
    perturbation variants.
    """
    table = np.asarray(table, dtype=np.float64)
    n, k = table.shape
    if n < 2 or k < 2:
        raise DataError("ICC needs at least 2 subjects and 2 raters")
    grand = table.mean()
    row_means = table.mean(axis=1)
    col_means = table.mean(axis=0)
    ss_rows = k * ((row_means - grand) ** 2).sum()
    ss_cols = n * ((col_means - grand) ** 2).sum()
    ss_total = ((table - grand) ** 2).sum()
    ss_err = ss_total - ss_rows - ss_cols
    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = ss_err / ((n - 1) * (k - 1))
    denom = msr + (k - 1) * mse + (k / n) * (msc - mse)
    if denom <= 0:
        # all variance zero: perfectly reproducible feature
        return 1.0 if ss_total == 0 else 0.0
    return float((msr - mse) / denom)


def stability_filter(original: FeatureMatrix, perturbed: list[FeatureMatrix],
                     icc_threshold: float = 0.75) -> list[str]:
    """Keep features whose ICC across (original, perturbed...) extractions
    reaches the threshold. All matrices must be row-aligned by nodule."""
    if not perturbed:
        raise DataError("stability_filter needs at least one perturbed extraction")
    keys = original.keys()
    for fm in perturbed:
        if fm.keys() != keys:
            raise DataError("perturbed extraction rows do not match the originals")
        if fm.feature_names != original.feature_names:
            raise DataError("perturbed extraction features do not match the originals")
    kept = []
    for j, name in enumerate(original.feature_names):
        table = np.column_stack(
            [original.values[:, j]] + [fm.values[:, j] for fm in perturbed]
        )
        if icc_agreement(table) >= icc_threshold:
            kept.append(name)
    return kept


def mannwhitney_pvalues(fm: FeatureMatrix) -> np.ndarray:
    """Two-sided Mann-Whitney U p-value per feature (midrank ties)."""
    pos = fm.labels == 1
    neg = fm.labels == 0
    if not pos.any() or not neg.any():
        raise DataError("discriminative analysis needs both classes")
    pvals = np.empty(fm.n_features)
    for j in range(fm.n_features):
        col = fm.values[:, j]
        if np.all(col[pos] == col[pos][0]) and np.all(col == col[0]):
            pvals[j] = 1.0
            continue
        _, p = mannwhitneyu(col[pos], col[neg], alternative="two-sided")
        pvals[j] = p
    return pvals


def discriminative_filter(fm: FeatureMatrix, p_threshold: float = 0.05) -> list[str]:
    pvals = mannwhitney_pvalues(fm)
    return [n for n, p in zip(fm.feature_names, pvals) if p < p_threshold]


def redundancy_filter(fm: FeatureMatrix, rho_threshold: float = 0.9) -> list[str]:
    """Greedy de-duplication: walk features by ascending Mann-Whitney p and
    drop any feature with |Spearman rho| > threshold against a kept one."""
    if fm.n_features < 2:
        return list(fm.feature_names)
    pvals = mannwhitney_pvalues(fm)
    order = np.lexsort((np.arange(fm.n_features), pvals))
    kept_idx: list[int] = []
    for j in order:
        redundant = False
        for k in kept_idx:
            rho = spearmanr(fm.values[:, j], fm.values[:, k]).statistic
            if np.isnan(rho):
                rho = 1.0 if np.array_equal(fm.values[:, j], fm.values[:, k]) else 0.0
            if abs(rho) > rho_threshold:
                redundant = True
                break
        if not redundant:
            kept_idx.append(j)
    kept_names = {fm.feature_names[j] for j in kept_idx}
    return [n for n in fm.feature_names if n in kept_names]
