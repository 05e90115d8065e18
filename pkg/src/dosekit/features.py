"""Tabular container for extracted radiomic features.

CSV layout: metadata columns ``subject_id,nodule_id,variant,label``
followed by one column per feature. ``variant`` distinguishes the
original extraction from perturbed-ROI re-extractions (dilate, erode,
contour_noise).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

META_COLUMNS = ["subject_id", "nodule_id", "variant", "label"]
ORIGINAL_VARIANT = "original"


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (n_samples, n_features)
    feature_names: list[str]
    labels: np.ndarray  # (n,) in {0, 1}
    subjects: list[str]
    nodule_ids: list[str]
    variants: list[str] = field(default_factory=list)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DataError("feature values must be 2D")
        if not np.all(np.isfinite(v)):
            raise DataError("feature matrix contains non-finite values")
        if len(self.feature_names) != v.shape[1]:
            raise DataError("feature name count does not match columns")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("feature names must be unique")
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (v.shape[0],) or not np.all(np.isin(labels, (0, 1))):
            raise DataError("labels must be a (n,) array over {0, 1}")
        if len(self.subjects) != v.shape[0] or len(self.nodule_ids) != v.shape[0]:
            raise DataError("metadata length mismatch")
        if not self.variants:
            self.variants = [ORIGINAL_VARIANT] * v.shape[0]
        if len(self.variants) != v.shape[0]:
            raise DataError("variant column length mismatch")
        self.values = v
        self.labels = labels

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def keys(self) -> list[tuple[str, str]]:
        return list(zip(self.subjects, self.nodule_ids))

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.feature_names.index(name)
        except ValueError as exc:
            raise DataError(f"unknown feature {name!r}") from exc
        return self.values[:, j]

    def select_features(self, names: list[str]) -> "FeatureMatrix":
        idx = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(
            self.values[:, idx],
            list(names),
            self.labels.copy(),
            list(self.subjects),
            list(self.nodule_ids),
            list(self.variants),
        )

    def select_rows(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix(
            self.values[idx],
            list(self.feature_names),
            self.labels[idx],
            [self.subjects[i] for i in idx],
            [self.nodule_ids[i] for i in idx],
            [self.variants[i] for i in idx],
        )

    def only_variant(self, variant: str) -> "FeatureMatrix":
        idx = [i for i, v in enumerate(self.variants) if v == variant]
        if not idx:
            raise DataError(f"no rows with variant {variant!r}")
        return self.select_rows(idx)


def save_features(fm: FeatureMatrix, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(META_COLUMNS + fm.feature_names)
        for i in range(fm.n_samples):
            row = [fm.subjects[i], fm.nodule_ids[i], fm.variants[i], int(fm.labels[i])]
            row.extend(repr(float(x)) for x in fm.values[i])
            writer.writerow(row)


def load_features(path) -> FeatureMatrix:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such feature file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[: len(META_COLUMNS)] != META_COLUMNS:
            raise DataError(f"{path}: unexpected feature CSV header")
        names = header[len(META_COLUMNS):]
        subjects, nodules, variants, labels, rows = [], [], [], [], []
        for row in reader:
            subjects.append(row[0])
            nodules.append(row[1])
            variants.append(row[2])
            labels.append(int(row[3]))
            rows.append([float(x) for x in row[4:]])
    if not rows:
        raise DataError(f"{path}: empty feature table")
    return FeatureMatrix(
        np.asarray(rows), names, np.asarray(labels), subjects, nodules, variants
    )
