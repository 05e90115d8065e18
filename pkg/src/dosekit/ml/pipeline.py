"""End-to-end training: feature analysis, balancing, the
(selector x classifier x subset size) grid, validation-based model
selection, and a reloadable model artifact.

Leakage guard: scaling parameters, filter decisions, selector fits, and
the decision threshold are all derived from training/validation data
only; the frozen pipeline is then applied row-wise to any evaluation
set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataError
from ..features import ORIGINAL_VARIANT, FeatureMatrix
from ..rng import derive_rng
from .balance import balance_dataset
from .classifiers import (
    CLASSIFIER_KINDS,
    DEFAULT_HYPERPARAMS,
    classifier_from_dict,
    make_classifier,
)
from .evaluation import classification_metrics, model_selection, optimal_threshold, roc_auc
from .filters import discriminative_filter, redundancy_filter, stability_filter
from .selectors import (
    SELECTOR_KINDS,
    PcaResult,
    lasso_select,
    mrmr_select,
    pca_select,
    rf_importance_select,
    rfe_select,
)

K_GRID_DEFAULT = (5, 10, 15, 20)


@dataclass
class TrainingConfig:
    selectors: tuple[str, ...] = SELECTOR_KINDS
    classifiers: tuple[str, ...] = CLASSIFIER_KINDS
    k_grid: tuple[int, ...] = K_GRID_DEFAULT
    icc_threshold: float = 0.75
    p_threshold: float = 0.05
    rho_threshold: float = 0.9
    hyperparams: dict = field(default_factory=dict)
    target_per_class: int | None = None  # None -> min(4 * minority, majority)
    seed: int = 0

    def __post_init__(self):
        for s in self.selectors:
            if s not in SELECTOR_KINDS:
                raise ConfigError(f"unknown selector {s!r}")
        for c in self.classifiers:
            if c not in CLASSIFIER_KINDS:
                raise ConfigError(f"unknown classifier {c!r}")
        if any(k < 1 for k in self.k_grid):
            raise ConfigError("k grid entries must be >= 1")


@dataclass
class TrainedModel:
    """Frozen inference pipeline: scaler -> feature subset or PCA -> classifier."""

    classifier_kind: str
    classifier: object
    selector_kind: str
    selected_features: list[str]  # names consumed from the input matrix
    scaler_mean: np.ndarray
    scaler_scale: np.ndarray
    threshold: float
    pca: PcaResult | None = None
    k: int | None = None

    def decision_scores(self, fm: FeatureMatrix) -> np.ndarray:
        sub = fm.select_features(self.selected_features)
        X = (sub.values - self.scaler_mean) / self.scaler_scale
        if self.pca is not None:
            X = X @ self.pca.loadings
        return self.classifier.predict_proba(X)

    def predict(self, fm: FeatureMatrix) -> np.ndarray:
        return (self.decision_scores(fm) >= self.threshold).astype(int)

    def to_dict(self) -> dict:
        out = {
            "schema_version": 1,
            "classifier_kind": self.classifier_kind,
            "selector_kind": self.selector_kind,
            "selected_features": self.selected_features,
            "scaler_mean": self.scaler_mean.tolist(),
            "scaler_scale": self.scaler_scale.tolist(),
            "threshold": self.threshold,
            "k": self.k,
            "classifier": self.classifier.to_dict(),
        }
        if self.pca is not None:
            out["pca_loadings"] = self.pca.loadings.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        pca = None
        if "pca_loadings" in d:
            loadings = np.asarray(d["pca_loadings"], dtype=np.float64)
            pca = PcaResult(
                component_names=[f"pc{j + 1}" for j in range(loadings.shape[1])],
                loadings=loadings,
                mean=np.zeros(loadings.shape[0]),
                scale=np.ones(loadings.shape[0]),
                explained_variance=np.zeros(loadings.shape[1]),
                feature_names=list(d["selected_features"]),
            )
        return cls(
            classifier_kind=d["classifier_kind"],
            classifier=classifier_from_dict(d["classifier"]),
            selector_kind=d["selector_kind"],
            selected_features=list(d["selected_features"]),
            scaler_mean=np.asarray(d["scaler_mean"], dtype=np.float64),
            scaler_scale=np.asarray(d["scaler_scale"], dtype=np.float64),
            threshold=float(d["threshold"]),
            pca=pca,
            k=d.get("k"),
        )


def save_model(model: TrainedModel, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True))


def load_model(path) -> TrainedModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such model file: {path}")
    return TrainedModel.from_dict(json.loads(path.read_text()))


@dataclass
class SelectionReport:
    stable: list[str]
    discriminative: list[str]
    non_redundant: list[str]
    selector_outputs: dict  # {(selector, k) -> feature list}
    validation_table: dict  # {(selector, classifier, k) -> metrics}
    chosen: tuple

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "n_stable": len(self.stable),
            "n_discriminative": len(self.discriminative),
            "n_non_redundant": len(self.non_redundant),
            "stable": self.stable,
            "discriminative": self.discriminative,
            "non_redundant": self.non_redundant,
            "selector_outputs": {
                f"{sel}|{k}": feats for (sel, k), feats in self.selector_outputs.items()
            },
            "validation": [
                {"selector": sel, "classifier": clf, "k": k, **metrics}
                for (sel, clf, k), metrics in sorted(
                    self.validation_table.items(),
                    key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or 0),
                )
            ],
            "chosen": {
                "selector": self.chosen[0],
                "classifier": self.chosen[1],
                "k": self.chosen[2],
            },
        }


def _fit_selector(selector: str, fm: FeatureMatrix, k: int | None, seed: int):
    """Returns (selected feature names, PcaResult or None)."""
    rng = derive_rng(seed, "selector", selector, k if k is not None else -1)
    if selector == "lasso":
        return lasso_select(fm, rng=rng), None
    if selector == "mrmr":
        return mrmr_select(fm, k), None
    if selector == "rfe":
        return rfe_select(fm, k), None
    if selector == "rf_importance":
        return rf_importance_select(fm, k, rng=rng), None
    _, pca = pca_select(fm, k)
    return list(fm.feature_names), pca


def _fit_combo(train: FeatureMatrix, selector: str, classifier: str,
               k: int | None, features: list[str], pca: PcaResult | None,
               hyperparams: dict, seed: int) -> TrainedModel:
    sub = train.select_features(features)
    mu = sub.values.mean(axis=0)
    sd = sub.values.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    X = (sub.values - mu) / sd
    if pca is not None:
        X = X @ pca.loadings
    rng = derive_rng(seed, "classifier", selector, classifier, k if k is not None else -1)
    model = make_classifier(classifier, hyperparams.get(classifier), rng=rng)
    model.fit(X, train.labels)
    return TrainedModel(
        classifier_kind=classifier,
        classifier=model,
        selector_kind=selector,
        selected_features=features,
        scaler_mean=mu,
        scaler_scale=sd,
        threshold=0.5,
        pca=pca,
        k=k,
    )


def run_training(train_original: FeatureMatrix,
                 train_perturbed: list[FeatureMatrix],
                 validation: FeatureMatrix,
                 config: TrainingConfig) -> tuple[TrainedModel, SelectionReport]:
    """Full protocol over original + perturbed training extractions.

    The perturbed matrices drive both the ICC stability filter and the
    minority-class augmentation; validation data is used only for
    threshold selection and for ranking grid combinations.
    """
    stable = stability_filter(train_original, train_perturbed, config.icc_threshold)
    if not stable:
        raise DataError("no features survive the stability filter")
    fm_stable = train_original.select_features(stable)
    discriminative = discriminative_filter(fm_stable, config.p_threshold)
    if not discriminative:
        raise DataError("no features survive the discriminative filter")
    non_redundant = redundancy_filter(
        fm_stable.select_features(discriminative), config.rho_threshold
    )

    filtered = train_original.select_features(non_redundant)
    counts = {c: int((filtered.labels == c).sum()) for c in (0, 1)}
    n_min, n_maj = min(counts.values()), max(counts.values())
    target = config.target_per_class
    if target is None:
        target = min(n_min * (1 + len(train_perturbed)), n_maj)
    augmenter = FeatureMatrix(
        np.vstack([p.select_features(non_redundant).values for p in train_perturbed]),
        list(non_redundant),
        np.concatenate([p.labels for p in train_perturbed]),
        sum((p.subjects for p in train_perturbed), []),
        sum((p.nodule_ids for p in train_perturbed), []),
        sum((p.variants for p in train_perturbed), []),
    )
    balanced = balance_dataset(
        filtered, target, derive_rng(config.seed, "balance"), augmenter
    )

    val = validation.only_variant(ORIGINAL_VARIANT)
    max_k = len(non_redundant)
    selector_outputs: dict = {}
    validation_table: dict = {}
    models: dict[tuple, TrainedModel] = {}
    for selector in config.selectors:
        k_values = [None] if selector == "lasso" else [k for k in config.k_grid if k <= max_k]
        for k in k_values:
            features, pca = _fit_selector(selector, balanced, k, config.seed)
            if not features:
                continue
            selector_outputs[(selector, k)] = features
            for classifier in config.classifiers:
                model = _fit_combo(
                    balanced, selector, classifier, k, features, pca,
                    config.hyperparams, config.seed,
                )
                scores = model.decision_scores(val)
                curve, _ = roc_auc(scores, val.labels)
                model.threshold = optimal_threshold(curve)
                metrics = classification_metrics(scores, val.labels, model.threshold)
                combo = (selector, classifier, k)
                validation_table[combo] = metrics
                models[combo] = model
    if not validation_table:
        raise DataError("validation grid is empty (no selector produced features)")

    chosen = model_selection(validation_table)
    report = SelectionReport(
        stable=stable,
        discriminative=discriminative,
        non_redundant=non_redundant,
        selector_outputs=selector_outputs,
        validation_table=validation_table,
        chosen=chosen,
    )
    return models[chosen], report
