"""Training-set class balancing: augment the minority class with
perturbed-ROI re-extractions, undersample the majority class."""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..features import ORIGINAL_VARIANT, FeatureMatrix


def balance_dataset(fm: FeatureMatrix, target_per_class: int,
                    rng: np.random.Generator,
                    augmenter: FeatureMatrix | None = None) -> FeatureMatrix:
    """Equal-count training set.

    ``fm`` holds original-variant rows only; ``augmenter`` holds the
    perturbed re-extractions of the same nodules (matching feature
    schema). Minority rows are kept and topped up with their perturbed
    variants in deterministic (nodule, variant) order; majority rows are
    undersampled without replacement.
    """
    if any(v != ORIGINAL_VARIANT for v in fm.variants):
        raise DataError("balance_dataset expects original-variant rows only")
    counts = {c: int((fm.labels == c).sum()) for c in (0, 1)}
    minority = min(counts, key=counts.get)
    majority = 1 - minority
    n_min, n_maj = counts[minority], counts[majority]
    if target_per_class > n_maj:
        raise DataError(
            f"majority class has {n_maj} rows, cannot reach {target_per_class}"
        )

    aug_rows: list[int] = []
    if augmenter is not None:
        if augmenter.feature_names != fm.feature_names:
            raise DataError("augmenter feature schema does not match")
        minority_keys = {
            key for key, lab in zip(fm.keys(), fm.labels) if lab == minority
        }
        aug_rows = [
            i
            for i, (key, var) in enumerate(zip(augmenter.keys(), augmenter.variants))
            if key in minority_keys and var != ORIGINAL_VARIANT
        ]
    needed = target_per_class - n_min
    if needed > len(aug_rows):
        raise DataError(
            f"minority class has {n_min} originals + {len(aug_rows)} perturbed rows, "
            f"cannot reach {target_per_class}"
        )

    min_idx = np.nonzero(fm.labels == minority)[0]
    maj_idx = np.nonzero(fm.labels == majority)[0]
    keep_maj = np.sort(rng.choice(maj_idx, size=target_per_class, replace=False))

    parts = [fm.select_rows(np.concatenate([min_idx, keep_maj]))]
    if needed > 0:
        parts.append(augmenter.select_rows(np.asarray(aug_rows[:needed])))
    merged = FeatureMatrix(
        np.vstack([p.values for p in parts]),
        list(fm.feature_names),
        np.concatenate([p.labels for p in parts]),
        sum((p.subjects for p in parts), []),
        sum((p.nodule_ids for p in parts), []),
        sum((p.variants for p in parts), []),
    )
    return merged
