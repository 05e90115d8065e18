from .balance import balance_dataset
from .classifiers import (
    CLASSIFIER_KINDS,
    AdaBoost,
    DecisionTree,
    KNearestNeighbors,
    LogisticRegression,
    RandomForest,
    make_classifier,
)
from .evaluation import (
    RocCurve,
    classification_metrics,
    model_selection,
    optimal_threshold,
    roc_auc,
)
from .filters import (
    discriminative_filter,
    icc_agreement,
    redundancy_filter,
    stability_filter,
)
from .pipeline import (
    SelectionReport,
    TrainedModel,
    TrainingConfig,
    load_model,
    run_training,
    save_model,
)
from .selectors import (
    SELECTOR_KINDS,
    lasso_select,
    mrmr_select,
    pca_select,
    rf_importance_select,
    rfe_select,
)

__all__ = [
    "balance_dataset",
    "CLASSIFIER_KINDS",
    "AdaBoost",
    "DecisionTree",
    "KNearestNeighbors",
    "LogisticRegression",
    "RandomForest",
    "make_classifier",
    "RocCurve",
    "classification_metrics",
    "model_selection",
    "optimal_threshold",
    "roc_auc",
    "discriminative_filter",
    "icc_agreement",
    "redundancy_filter",
    "stability_filter",
    "SelectionReport",
    "TrainedModel",
    "TrainingConfig",
    "load_model",
    "run_training",
    "save_model",
    "SELECTOR_KINDS",
    "lasso_select",
    "mrmr_select",
    "pca_select",
    "rf_importance_select",
    "rfe_select",
]
